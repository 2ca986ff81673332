"""Special functions used by the count model and the correlation test.

Thin domain-checked wrappers over ``scipy.special`` (Cephes/Boost
implementations); callers get a ValueError instead of silent NaN/inf.
"""
from __future__ import annotations

import numpy as np
from scipy import special


def _positive(x, name):
    arr = np.asarray(x, dtype=float)
    if not np.all(arr > 0) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} requires finite x > 0")
    return arr


def _out(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def log_gamma(x):
    return _out(special.gammaln(_positive(x, "log_gamma")), x)


def digamma(x):
    return _out(special.digamma(_positive(x, "digamma")), x)


def trigamma(x):
    return _out(special.polygamma(1, _positive(x, "trigamma")), x)


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("betainc_reg requires a > 0 and b > 0")
    if not 0.0 <= x <= 1.0:
        raise ValueError("betainc_reg requires 0 <= x <= 1")
    return float(special.betainc(a, b, x))
