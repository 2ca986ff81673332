"""One forecasting run: features, shared split, fit, predict, score.

Every run in a region is trained and scored on the same rows, so runs can
be compared. Only rows with a full history window are eligible (the
network needs ``window`` days before its target); the linear and count
models use those same rows.
"""
from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field

import numpy as np

from .core import AlignedDataset, align, split
from .errors import ArgumentError, ProtocolError
from .evaluate import MetricsReport, report
from .linreg import fit_ols, predict_ols
from .nbreg import fit_nb2, predict_nb2
from .neuralnet import NetworkConfig, TrainConfig, fit_cnn, make_windows

LAG_FEATURE = "cases_lag1"
MODELS = ("linear", "nb2", "dnn")
SPLIT_RATIO = 0.85


def build_dataset(trends, cases) -> AlignedDataset:
    """Trend columns (input order) plus the previous-day case count."""
    return align(list(trends), cases, lag_days=1)


def feature_set(ds: AlignedDataset, uses_trends: bool, with_lag: bool = True) -> list[str]:
    trend_cols = [c for c in ds.feature_names if c != LAG_FEATURE]
    if not uses_trends:
        return [LAG_FEATURE]
    if not trend_cols:
        raise ArgumentError("dataset has no trend columns")
    return trend_cols + ([LAG_FEATURE] if with_lag else [])


@dataclass(frozen=True)
class ProtocolSplit:
    train_rows: tuple[int, ...]
    test_rows: tuple[int, ...]
    key: str


def protocol_split(ds: AlignedDataset, window: int, ratio: float = SPLIT_RATIO,
                   seed: int = 0) -> ProtocolSplit:
    eligible = list(range(window, ds.n))
    if len(eligible) < 2:
        raise ArgumentError(f"{ds.n} rows leave fewer than 2 targets after a {window}-day window")
    parts = split(len(eligible), ratio, seed)
    train_rows = tuple(eligible[i] for i in parts.train)
    test_rows = tuple(eligible[i] for i in parts.test)
    if not test_rows:
        raise ProtocolError("split left the test set empty")
    digest = hashlib.sha256(",".join(ds.dates[r].isoformat() for r in test_rows).encode()).hexdigest()
    return ProtocolSplit(train_rows, test_rows, digest[:16])


@dataclass
class RunResult:
    model: str
    uses_trends: bool
    region: str
    features: tuple[str, ...]
    split: ProtocolSplit
    dates: tuple
    actual: np.ndarray
    predicted: np.ndarray
    fit: object
    seed: int
    window: int
    history: list = field(default_factory=list)

    def metrics(self) -> MetricsReport:
        return report(self.model, self.region, self.uses_trends, self.actual, self.predicted,
                      self.split.key)

    def predictions_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["date", "actual", "predicted"])
        for d, a, p in zip(self.dates, self.actual, self.predicted):
            w.writerow([d.isoformat(), format(float(a), ".10g"), format(float(p), ".10g")])
        return buf.getvalue()


def run(ds: AlignedDataset, model: str, uses_trends: bool = True, seed: int = 0,
        window: int = 28, ratio: float = SPLIT_RATIO, with_lag: bool = True,
        net_cfg: NetworkConfig | None = None, train_cfg: TrainConfig | None = None,
        clamp: bool = False) -> RunResult:
    if model not in MODELS:
        raise ArgumentError(f"unknown model {model!r}; choose from {', '.join(MODELS)}")
    cols = feature_set(ds, uses_trends, with_lag)
    sub = ds.columns(cols)
    parts = protocol_split(ds, window, ratio, seed)
    train, test = list(parts.train_rows), list(parts.test_rows)
    history = []
    if model == "linear":
        fit = fit_ols(sub.rows(train))
        pred = predict_ols(fit, sub.X[test], clamp=clamp)
    elif model == "nb2":
        fit = fit_nb2(sub.rows(train))
        pred = predict_nb2(fit, sub.X[test])
    else:
        net_cfg = net_cfg or NetworkConfig(window=window)
        if net_cfg.window != window:
            raise ArgumentError(f"network window {net_cfg.window} != protocol window {window}")
        train_cfg = train_cfg or TrainConfig(seed=seed)
        fit = fit_cnn(sub, train, net_cfg, train_cfg)
        pred = fit.predict_windows(make_windows(sub, window, test).X)
        if clamp:
            pred = np.maximum(pred, 0.0)
        history = list(fit.history)
    return RunResult(model, uses_trends, ds.region, tuple(cols), parts,
                     tuple(ds.dates[r] for r in test), ds.y[test].copy(), np.asarray(pred, dtype=float),
                     fit, seed, window, history)
