"""Series types, date alignment, lag features and the seeded split."""
from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import AlignmentError, ArgumentError
from .rng import Xoshiro256

DateStamp = dt.date


def parse_date(text: str) -> DateStamp:
    return dt.date.fromisoformat(text.strip())


def _check_increasing(dates: Sequence[DateStamp], what: str) -> None:
    for a, b in zip(dates, dates[1:]):
        if not a < b:
            raise ValueError(f"{what}: dates must be strictly increasing ({a} then {b})")


@dataclass(frozen=True)
class TrendSeries:
    term: str
    geo: str
    points: tuple[tuple[DateStamp, float], ...]

    def __post_init__(self):
        if not self.term:
            raise ValueError("term must be nonempty")
        object.__setattr__(self, "points", tuple((d, float(v)) for d, v in self.points))
        _check_increasing(self.dates, f"trend {self.term!r}")
        for d, v in self.points:
            if not 0.0 <= v <= 100.0:
                raise ValueError(f"trend {self.term!r}: value {v} on {d} outside [0, 100]")

    @property
    def name(self) -> str:
        return self.term

    @property
    def dates(self) -> tuple[DateStamp, ...]:
        return tuple(d for d, _ in self.points)

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.points], dtype=float)


@dataclass(frozen=True)
class FeatureSeries:
    """Unconstrained named series; what an aligned dataset decomposes into."""

    name: str
    points: tuple[tuple[DateStamp, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple((d, float(v)) for d, v in self.points))
        _check_increasing(self.dates, f"feature {self.name!r}")

    @property
    def dates(self) -> tuple[DateStamp, ...]:
        return tuple(d for d, _ in self.points)

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.points], dtype=float)


@dataclass(frozen=True)
class CaseSeries:
    region: str
    points: tuple[tuple[DateStamp, float], ...]

    def __post_init__(self):
        pts = []
        for d, v in self.points:
            if v < 0:
                raise ValueError(f"cases for {self.region!r}: negative count {v} on {d}")
            pts.append((d, int(v) if float(v).is_integer() else float(v)))
        object.__setattr__(self, "points", tuple(pts))
        _check_increasing(self.dates, f"cases {self.region!r}")

    @property
    def dates(self) -> tuple[DateStamp, ...]:
        return tuple(d for d, _ in self.points)

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.points], dtype=float)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class AlignedDataset:
    dates: tuple[DateStamp, ...]
    feature_names: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    region: str = ""

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        X = _frozen(self.X)
        if X.ndim == 1:
            X = _frozen(X.reshape(-1, 1))
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", _frozen(self.y).reshape(-1))
        n = len(self.dates)
        if self.X.shape != (n, len(self.feature_names)) or self.y.shape != (n,):
            raise ValueError(
                f"inconsistent shapes: {n} dates, X {self.X.shape}, y {self.y.shape}, "
                f"{len(self.feature_names)} names")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise ValueError("dataset contains missing or non-finite values")

    @property
    def n(self) -> int:
        return len(self.dates)

    @property
    def p(self) -> int:
        return len(self.feature_names)

    def __eq__(self, other):
        if not isinstance(other, AlignedDataset):
            return NotImplemented
        return (self.dates == other.dates and self.feature_names == other.feature_names
                and self.region == other.region
                and np.array_equal(self.X, other.X) and np.array_equal(self.y, other.y))

    __hash__ = None

    def rows(self, indices: Iterable[int]) -> "AlignedDataset":
        idx = list(indices)
        return AlignedDataset(tuple(self.dates[i] for i in idx), self.feature_names,
                              self.X[idx], self.y[idx], self.region)

    def columns(self, names: Sequence[str]) -> "AlignedDataset":
        missing = [c for c in names if c not in self.feature_names]
        if missing:
            raise KeyError(f"unknown feature(s): {missing}")
        idx = [self.feature_names.index(c) for c in names]
        return AlignedDataset(self.dates, tuple(names), self.X[:, idx], self.y, self.region)

    def feature_series(self) -> list[FeatureSeries]:
        return [FeatureSeries(name, tuple(zip(self.dates, self.X[:, j])))
                for j, name in enumerate(self.feature_names)]

    def target_series(self) -> CaseSeries:
        return CaseSeries(self.region, tuple(zip(self.dates, self.y)))


@dataclass(frozen=True)
class SplitIndices:
    train: tuple[int, ...]
    test: tuple[int, ...]
    seed: int = field(default=0)


def align(trends: Sequence, cases: CaseSeries,
          lag_days: int | Sequence[int] = 0) -> AlignedDataset:
    """Join feature series and a case series on their common dates.

    ``lag_days=k`` appends a ``cases_lag<k>`` column holding the count from
    ``k`` calendar days earlier; a sequence requests several lags. Rows are
    kept only where every feature, every lag and the target are present.
    """
    lags = [lag_days] if isinstance(lag_days, (int, np.integer)) else list(lag_days)
    lags = [int(k) for k in lags]
    if any(k < 0 for k in lags):
        raise ArgumentError("lag_days must be non-negative")
    lags = [k for k in lags if k > 0]
    if not cases.points:
        raise AlignmentError(f"case series {cases.region!r} is empty")
    names = [s.name for s in trends]
    if len(set(names)) != len(names):
        raise AlignmentError(f"duplicate feature names: {names}")
    for s in trends:
        if not s.points:
            raise AlignmentError(f"feature series {s.name!r} is empty")
    names += [f"cases_lag{k}" for k in lags]
    if not names:
        raise AlignmentError("nothing to align: no feature series and no lag requested")

    case_map = dict(cases.points)
    common = set(case_map)
    for s in trends:
        common &= set(s.dates)
    for k in lags:
        shift = dt.timedelta(days=k)
        common &= {d for d in case_map if d - shift in case_map}
    if not common:
        spans = [f"{s.name}: {s.dates[0]}..{s.dates[-1]}" for s in trends]
        spans.append(f"cases[{cases.region}]: {cases.dates[0]}..{cases.dates[-1]}")
        raise AlignmentError("no date is shared by all series (" + "; ".join(spans) + ")")

    dates = sorted(common)
    maps = [dict(s.points) for s in trends]
    X = np.empty((len(dates), len(names)))
    for i, d in enumerate(dates):
        row = [m[d] for m in maps]
        row += [case_map[d - dt.timedelta(days=k)] for k in lags]
        X[i] = row
    y = [case_map[d] for d in dates]
    if len(dates) < 2:
        raise AlignmentError(f"only {len(dates)} aligned date(s); need at least 2")
    return AlignedDataset(tuple(dates), tuple(names), X, y, cases.region)


def train_size(n: int, ratio: float) -> int:
    # round half up
    return int(math.floor(ratio * n + 0.5))


def split(ds_or_n, ratio: float = 0.85, seed: int = 0) -> SplitIndices:
    """Seeded random partition of row indices into train and test.

    A Fisher-Yates shuffle driven by xoshiro256** (splitmix64-seeded); the
    first ``round_half_up(ratio * n)`` shuffled indices form the training set.
    """
    n = ds_or_n if isinstance(ds_or_n, int) else ds_or_n.n
    if not 0.0 < ratio < 1.0:
        raise ArgumentError(f"ratio must lie in (0, 1), got {ratio}")
    if n < 2:
        raise ArgumentError(f"need at least 2 rows to split, got {n}")
    perm = Xoshiro256(seed).permutation(n)
    k = train_size(n, ratio)
    return SplitIndices(tuple(sorted(perm[:k])), tuple(sorted(perm[k:])), seed & ((1 << 64) - 1))
