"""Forecast metrics and the with/without-trends comparison table."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, ProtocolError

MODEL_LABELS = {"linear": "Linear", "nb2": "Negative Binomial", "dnn": "Deep Neural Network"}
MODEL_ORDER = ("linear", "nb2", "dnn")


class MetricError(ArgumentError):
    pass


def metrics(y, yhat) -> dict:
    """RMSE, MAE, MAPE, the absolute-ratio R2 and the conventional R2.

    ``r2_abs`` is 1 - sum|y - yhat| / sum|y - mean(y)|. MAPE skips
    terms whose actual value is zero and reports how many were skipped.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    yhat = np.asarray(yhat, dtype=float).reshape(-1)
    if y.shape != yhat.shape or y.size == 0:
        raise MetricError(f"need equal-length nonempty vectors, got {y.size} and {yhat.size}")
    err = y - yhat
    abs_err = np.abs(err)
    nonzero = y != 0
    if not np.any(nonzero):
        raise MetricError("MAPE undefined: every actual value is zero")
    spread = np.abs(y - y.mean())
    if not np.any(spread > 0):
        raise MetricError("R2 undefined: actual values are constant")
    return {
        "rmse": math.sqrt(float(np.mean(err * err))),
        "mae": float(np.mean(abs_err)),
        "mape": float(np.mean(abs_err[nonzero] / np.abs(y[nonzero]))),
        "mape_skipped": int(np.sum(~nonzero)),
        "r2_abs": 1.0 - float(abs_err.sum() / spread.sum()),
        "r2": 1.0 - float((err @ err) / (spread @ spread)),
    }


@dataclass(frozen=True)
class MetricsReport:
    model_name: str
    region: str
    uses_trends: bool
    rmse: float
    mae: float
    mape: float
    r2_abs: float
    r2: float
    n_test: int
    mape_skipped: int = 0
    split_key: str = ""

    @property
    def label(self) -> str:
        base = MODEL_LABELS.get(self.model_name, self.model_name)
        return f"{base} + GT" if self.uses_trends else base


def report(model_name, region, uses_trends, y, yhat, split_key="") -> MetricsReport:
    m = metrics(y, yhat)
    return MetricsReport(model_name, region, bool(uses_trends), m["rmse"], m["mae"], m["mape"],
                         m["r2_abs"], m["r2"], len(np.atleast_1d(y)), m["mape_skipped"], split_key)


def improvement(rmse_base: float, rmse_with: float) -> float:
    """Relative RMSE reduction, e.g. 1595 -> 807 gives 0.494."""
    if rmse_base <= 0:
        raise MetricError("baseline RMSE must be positive")
    return (rmse_base - rmse_with) / rmse_base


@dataclass(frozen=True)
class Comparison:
    rows: tuple[MetricsReport, ...]
    improvements: tuple[tuple[str, str, float], ...]  # (region, model, fraction)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["region", "model", "label", "uses_trends", "rmse", "mae", "mape",
                    "r2_abs", "r2", "n_test", "mape_skipped"])
        for r in self.rows:
            w.writerow([r.region, r.model_name, r.label, str(r.uses_trends).lower(),
                        _num(r.rmse), _num(r.mae), _num(r.mape), _num(r.r2_abs), _num(r.r2),
                        r.n_test, r.mape_skipped])
        return buf.getvalue()

    def improvements_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["region", "model", "rmse_improvement"])
        for region, model, frac in self.improvements:
            w.writerow([region, model, _num(frac)])
        return buf.getvalue()

    def to_text(self) -> str:
        lines = []
        header = f"{'region':<10} {'run':<25} {'RMSE':>12} {'MAE':>12} {'MAPE':>10} {'R2':>10} {'R2(sq)':>10} {'n':>4}"
        lines.append(header)
        lines.append("-" * len(header))
        for r in self.rows:
            lines.append(f"{r.region or 'world':<10} {r.label:<25} {_num(r.rmse):>12} {_num(r.mae):>12} "
                         f"{_num(r.mape):>10} {_num(r.r2_abs):>10} {_num(r.r2):>10} {r.n_test:>4}")
        if self.improvements:
            lines.append("")
            for region, model, frac in self.improvements:
                lines.append(f"{region or 'world'}: {MODEL_LABELS.get(model, model)} RMSE improvement "
                             f"with trends {_num(100 * frac)}%")
        return "\n".join(lines) + "\n"


def _num(v: float) -> str:
    return format(v, ".6g")


def compare(runs) -> Comparison:
    """Tabulate runs and the per-model RMSE gain from adding trend features.

    Runs sharing a region must have been evaluated on the same test split.
    """
    runs = list(runs)
    split_by_region: dict[str, str] = {}
    for r in runs:
        key = split_by_region.setdefault(r.region, r.split_key)
        if key != r.split_key:
            raise ProtocolError(f"runs for region {r.region!r} were evaluated on different test splits")
    improvements = []
    seen = set()
    for r in runs:
        key = (r.region, r.model_name)
        if key in seen:
            continue
        seen.add(key)
        base = [x for x in runs if (x.region, x.model_name) == key and not x.uses_trends]
        with_gt = [x for x in runs if (x.region, x.model_name) == key and x.uses_trends]
        if base and with_gt:
            improvements.append((r.region, r.model_name, improvement(base[0].rmse, with_gt[0].rmse)))
    return Comparison(tuple(runs), tuple(improvements))
