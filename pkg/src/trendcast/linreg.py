"""Multiple linear regression solved by Householder QR.

The residual variance uses the n - p - 1 denominator (the usual unbiased
estimator for p regressors plus an intercept).
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .core import AlignedDataset
from .errors import ArgumentError, InsufficientDataError, SingularDesignError

COLLINEARITY_WARN_COND = 1e10


class CollinearityWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class OlsFit:
    beta: np.ndarray  # intercept first
    sigma2: float
    feature_names: tuple[str, ...]

    def to_json(self) -> str:
        return json.dumps({"model": "linear", "feature_names": list(self.feature_names),
                           "beta": [float(b) for b in self.beta], "sigma2": float(self.sigma2)},
                          indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "OlsFit":
        d = json.loads(text)
        return cls(np.array(d["beta"], dtype=float), float(d["sigma2"]), tuple(d["feature_names"]))


def design_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    return np.column_stack([np.ones(X.shape[0]), X])


def _collinear_columns(A: np.ndarray, names) -> list[str]:
    # walk columns left to right; a column that does not raise the rank is collinear
    tol = max(A.shape) * np.finfo(float).eps * np.linalg.norm(A, 2)
    bad = []
    basis = []
    for j in range(A.shape[1]):
        cand = basis + [j]
        if np.linalg.matrix_rank(A[:, cand], tol=tol) == len(cand):
            basis = cand
        else:
            bad.append(names[j])
    return bad


def fit_ols_arrays(X, y, feature_names=None) -> OlsFit:
    A = design_matrix(X)
    y = np.asarray(y, dtype=float).reshape(-1)
    n, k = A.shape
    names = list(feature_names) if feature_names is not None else [f"x{j + 1}" for j in range(k - 1)]
    if len(y) != n:
        raise ArgumentError(f"X has {n} rows but y has {len(y)}")
    if n <= k:
        raise InsufficientDataError(f"need n > p + 1 observations, got n={n}, p={k - 1}")

    Q, R = np.linalg.qr(A, mode="reduced")
    diag = np.abs(np.diag(R))
    if diag.min() <= k * np.finfo(float).eps * max(diag.max(), 1.0) * 1e3:
        bad = _collinear_columns(A, ["(intercept)"] + names)
        raise SingularDesignError(
            "design matrix is rank deficient; collinear column(s): " + ", ".join(bad or ["?"]), bad)
    cond = np.linalg.cond(R)
    if cond > COLLINEARITY_WARN_COND:
        warnings.warn(f"design matrix condition number {cond:.3g}", CollinearityWarning, stacklevel=2)
    beta = solve_triangular(R, Q.T @ y)
    resid = y - A @ beta
    sigma2 = float(resid @ resid / (n - k))
    return OlsFit(beta, sigma2, tuple(names))


def fit_ols(ds: AlignedDataset) -> OlsFit:
    return fit_ols_arrays(ds.X, ds.y, ds.feature_names)


def predict_ols(fit: OlsFit, X, clamp: bool = False) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.shape[1] != len(fit.beta) - 1:
        raise ArgumentError(f"fit expects {len(fit.beta) - 1} feature column(s), got {X.shape[1]}")
    yhat = fit.beta[0] + X @ fit.beta[1:]
    return np.maximum(yhat, 0.0) if clamp else yhat
