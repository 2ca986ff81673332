"""Pearson screening of candidate features against the target."""
from __future__ import annotations

import csv
import datetime as dt
import io
import math
from dataclasses import dataclass

import numpy as np

from .core import AlignedDataset, FeatureSeries
from .errors import ArgumentError, EmptySelectionError, UndefinedCorrelationError
from .specfun import betainc_reg

DEFAULT_THRESHOLD = 0.7


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ArgumentError(f"pearson needs two equal-length vectors, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise ArgumentError("pearson needs at least 2 observations")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = dx @ dx
    syy = dy @ dy
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedCorrelationError("correlation undefined for a constant vector")
    r = (dx @ dy) / (math.sqrt(sxx) * math.sqrt(syy))
    return float(min(1.0, max(-1.0, r)))


def pearson_p_value(r: float, n: int) -> float:
    """Two-sided p-value of H0: rho = 0 via Student's t with n-2 dof.

    With t^2 = r^2 (n-2) / (1-r^2), the two-sided tail P(|T| > |t|) equals
    I_{df/(df+t^2)}(df/2, 1/2), and df/(df+t^2) reduces to 1 - r^2.
    When p is above 1/2 the equivalent 1 - I_{r^2}(1/2, df/2) is used
    instead, since for tiny r forming 1 - r^2 rounds away the information.
    """
    if n < 3:
        raise ArgumentError(f"p-value needs n >= 3, got {n}")
    if abs(r) >= 1.0:
        return 0.0
    df = n - 2
    r2 = r * r
    below = betainc_reg(0.5, df / 2.0, r2)
    if below < 0.5:
        return 1.0 - below
    return betainc_reg(df / 2.0, 0.5, 1.0 - r2)


@dataclass(frozen=True)
class CorrelationRow:
    term: str
    r: float
    p_value: float
    kept: bool


@dataclass(frozen=True)
class CorrelationReport:
    rows: tuple[CorrelationRow, ...]
    threshold: float
    n: int
    absolute: bool = False

    @property
    def kept(self) -> list[str]:
        return [row.term for row in self.rows if row.kept]

    @property
    def dropped(self) -> list[str]:
        return [row.term for row in self.rows if not row.kept]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["term", "r", "p_value", "kept"])
        for row in self.rows:
            w.writerow([row.term, f"{row.r:.10f}", f"{row.p_value:.6e}", str(row.kept).lower()])
        return buf.getvalue()


def screen(ds: AlignedDataset, threshold: float = DEFAULT_THRESHOLD,
           absolute: bool = False) -> CorrelationReport:
    if not 0.0 <= threshold < 1.0:
        raise ArgumentError(f"threshold must lie in [0, 1), got {threshold}")
    if np.all(ds.y == ds.y[0]):
        raise UndefinedCorrelationError("target series is constant; correlation undefined")
    rows = []
    for j, name in enumerate(ds.feature_names):
        try:
            r = pearson(ds.X[:, j], ds.y)
        except UndefinedCorrelationError:
            # a flat trend carries no signal
            rows.append(CorrelationRow(name, float("nan"), float("nan"), False))
            continue
        p = pearson_p_value(r, ds.n) if ds.n >= 3 else float("nan")
        score = abs(r) if absolute else r
        rows.append(CorrelationRow(name, r, p, score > threshold))
    return CorrelationReport(tuple(rows), threshold, ds.n, absolute)


def select_features(ds: AlignedDataset, threshold: float = DEFAULT_THRESHOLD,
                    absolute: bool = False) -> tuple[AlignedDataset, CorrelationReport]:
    """Keep the features whose correlation with the target exceeds ``threshold``.

    The comparison is strict and on the signed coefficient unless
    ``absolute`` is set.
    """
    report = screen(ds, threshold, absolute)
    if not report.kept:
        raise EmptySelectionError(
            f"no feature has correlation above {threshold}; nothing left to fit")
    return ds.columns(report.kept), report


def lead(series, days: int) -> FeatureSeries:
    """Re-date a series ``days`` later so that value[t - days] lines up with day t."""
    shift = dt.timedelta(days=days)
    return FeatureSeries(series.name, tuple((d + shift, v) for d, v in series.points))
