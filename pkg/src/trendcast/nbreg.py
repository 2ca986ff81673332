"""NB2 negative-binomial regression with a log link, fitted by maximum likelihood.

The pmf is the standard NB2 form

    P(y | mu, alpha) = Gamma(y + 1/alpha) / (Gamma(y + 1) Gamma(1/alpha))
                       * (1 / (1 + alpha mu))^(1/alpha)
                       * (alpha mu / (1 + alpha mu))^y

with Var(y) = mu + alpha mu^2 and ln mu = x . beta. The heterogeneity
parameter is optimised as theta = ln(alpha) so it stays positive.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .core import AlignedDataset
from .errors import ArgumentError, InsufficientDataError, ModelDomainError
from .linreg import design_matrix
from .specfun import digamma, trigamma

ALPHA_MIN = 1e-8
THETA_MIN = math.log(ALPHA_MIN)
THETA_MAX = math.log(1e8)
ETA_MAX = 700.0


class DispersionWarning(UserWarning):
    pass


def nb2_log_pmf(y, mu, alpha):
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if np.any(y < 0) or np.any(y != np.floor(y)):
        raise ArgumentError("y must be a non-negative integer")
    if np.any(~(mu > 0)) or np.any(~(alpha > 0)):
        raise ArgumentError("mu and alpha must be positive")
    r = 1.0 / alpha
    am = alpha * mu
    # lgamma(y+r) - lgamma(r) - lgamma(y+1) == -betaln(y+1, r) - log(y+r); stable for large r
    log_coef = -special.betaln(y + 1.0, r) - np.log(y + r)
    out = log_coef - np.log1p(am) / alpha + special.xlogy(y, am) - y * np.log1p(am)
    return float(out) if out.ndim == 0 else out


def _check_counts(y) -> np.ndarray:
    y = np.asarray(y, dtype=float).reshape(-1)
    if not np.all(np.isfinite(y)) or np.any(y < 0) or np.any(np.abs(y - np.round(y)) > 1e-9):
        raise ModelDomainError("NB2 regression needs non-negative integer counts as the target")
    return np.round(y)


def log_likelihood(beta, theta, A, y) -> float:
    eta = np.clip(A @ beta, -ETA_MAX, ETA_MAX)
    return float(np.sum(nb2_log_pmf(y, np.exp(eta), math.exp(theta))))


def score(beta, theta, A, y) -> np.ndarray:
    """Gradient of the log-likelihood with respect to (beta, theta)."""
    mu = np.exp(np.clip(A @ beta, -ETA_MAX, ETA_MAX))
    alpha = math.exp(theta)
    r = 1.0 / alpha
    am = alpha * mu
    g_beta = A.T @ ((y - mu) / (1.0 + am))
    g_theta = np.sum(r * (np.log1p(am) - digamma(y + r) + digamma(r)) + (y - mu) / (1.0 + am))
    return np.append(g_beta, g_theta)


def hessian(beta, theta, A, y) -> np.ndarray:
    """Observed Hessian of the log-likelihood in (beta, theta)."""
    mu = np.exp(np.clip(A @ beta, -ETA_MAX, ETA_MAX))
    alpha = math.exp(theta)
    r = 1.0 / alpha
    am = alpha * mu
    k = A.shape[1]
    H = np.empty((k + 1, k + 1))
    H[:k, :k] = -(A * (mu * (1.0 + alpha * y) / (1.0 + am) ** 2)[:, None]).T @ A
    cross = A.T @ (-am * (y - mu) / (1.0 + am) ** 2)
    H[:k, k] = cross
    H[k, :k] = cross
    H[k, k] = _theta_curvature(theta, mu, y)
    return H


def _theta_derivs(theta, mu, y):
    r = math.exp(-theta)
    d1 = np.sum(digamma(y + r) - digamma(r) + np.log(r / (r + mu)) + (mu - y) / (r + mu))
    d2 = np.sum(trigamma(y + r) - trigamma(r) + 1.0 / r - 1.0 / (r + mu) - (mu - y) / (r + mu) ** 2)
    # chain rule through r = exp(-theta)
    return -r * d1, r * r * d2 + r * d1


def _theta_curvature(theta, mu, y):
    return _theta_derivs(theta, mu, y)[1]


@dataclass(frozen=True, eq=False)
class Nb2Fit:
    beta: np.ndarray
    alpha: float
    log_likelihood: float
    iterations: int
    converged: bool
    feature_names: tuple[str, ...] = ()
    initial_log_likelihood: float = float("nan")
    alpha_clamped: bool = False
    score_norm: float = float("nan")
    std_errors: np.ndarray = field(default=None)
    alpha_std_error: float = float("nan")

    def to_json(self) -> str:
        def num(v):
            return None if v is None or not math.isfinite(v) else float(v)
        return json.dumps({
            "model": "nb2",
            "feature_names": list(self.feature_names),
            "beta": [float(b) for b in self.beta],
            "alpha": float(self.alpha),
            "log_likelihood": num(self.log_likelihood),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "alpha_clamped": bool(self.alpha_clamped),
            "score_norm": num(self.score_norm),
            "std_errors": None if self.std_errors is None else [num(s) for s in self.std_errors],
            "alpha_std_error": num(self.alpha_std_error),
        }, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Nb2Fit":
        d = json.loads(text)
        se = d.get("std_errors")
        return cls(np.array(d["beta"], dtype=float), float(d["alpha"]),
                   float(d["log_likelihood"]) if d.get("log_likelihood") is not None else float("nan"),
                   int(d["iterations"]), bool(d["converged"]), tuple(d["feature_names"]),
                   alpha_clamped=bool(d.get("alpha_clamped", False)),
                   std_errors=None if se is None else np.array([np.nan if s is None else s for s in se]))


def poisson_log_likelihood(beta, A, y) -> float:
    mu = np.exp(np.clip(A @ beta, -ETA_MAX, ETA_MAX))
    return float(np.sum(special.xlogy(y, mu) - mu - special.gammaln(y + 1.0)))


def fit_poisson(A, y, max_iter: int = 100, tol: float = 1e-10):
    """Poisson GLM by IRLS; returns ``(beta, converged)``."""
    beta = np.zeros(A.shape[1])
    beta[0] = math.log(max(y.mean(), 1e-8))
    ll = poisson_log_likelihood(beta, A, y)
    for _ in range(max_iter):
        mu = np.exp(np.clip(A @ beta, -ETA_MAX, ETA_MAX))
        info = (A * mu[:, None]).T @ A
        try:
            step = np.linalg.solve(info, A.T @ (y - mu))
        except np.linalg.LinAlgError:
            return beta, False
        t = 1.0
        for _ in range(30):
            cand = beta + t * step
            ll_new = poisson_log_likelihood(cand, A, y)
            if np.isfinite(ll_new) and ll_new >= ll - 1e-12 * abs(ll):
                break
            t *= 0.5
        else:
            return beta, False
        beta, ll = cand, ll_new
        if np.max(np.abs(t * step)) < tol:
            return beta, bool(np.all(np.isfinite(beta)))
    return beta, False


def _initial_beta(A, y):
    beta, ok = fit_poisson(A, y)
    if ok:
        return beta
    beta, *_ = np.linalg.lstsq(A, np.log(y + 1.0), rcond=None)
    return beta


def _moment_alpha(A, beta, y) -> float:
    mu = np.exp(np.clip(A @ beta, -ETA_MAX, ETA_MAX))
    return max(1e-4, float(np.sum((y - mu) ** 2 - mu) / np.sum(mu ** 2)))


def _beta_step(beta, theta, A, y, ll):
    """One Fisher-scoring step on beta at fixed alpha, with step halving."""
    alpha = math.exp(theta)
    mu = np.exp(np.clip(A @ beta, -ETA_MAX, ETA_MAX))
    w = mu / (1.0 + alpha * mu)
    info = (A * w[:, None]).T @ A
    grad = A.T @ ((y - mu) / (1.0 + alpha * mu))
    try:
        step = np.linalg.solve(info, grad)
    except np.linalg.LinAlgError:
        step = np.linalg.lstsq(info, grad, rcond=None)[0]
    t = 1.0
    for _ in range(31):
        cand = beta + t * step
        ll_new = log_likelihood(cand, theta, A, y)
        if np.isfinite(ll_new) and ll_new >= ll:
            return cand, ll_new
        t *= 0.5
    return beta, ll


def _theta_step(beta, theta, A, y, ll):
    """One safeguarded Newton step on theta = ln(alpha), with step halving."""
    mu = np.exp(np.clip(A @ beta, -ETA_MAX, ETA_MAX))
    g, h = _theta_derivs(theta, mu, y)
    if h < 0:
        step = -g / h
    else:
        step = math.copysign(1.0, g)
    step = max(-5.0, min(5.0, step))
    t = 1.0
    for _ in range(31):
        cand = min(THETA_MAX, max(THETA_MIN, theta + t * step))
        ll_new = log_likelihood(beta, cand, A, y)
        if np.isfinite(ll_new) and ll_new >= ll:
            return cand, ll_new
        t *= 0.5
    return theta, ll


def fit_nb2_arrays(X, y, feature_names=None, max_iter: int = 200, tol: float = 1e-8,
                   inner_iter: int = 25) -> Nb2Fit:
    """Maximum-likelihood NB2 fit by alternating beta and theta updates.

    Each outer iteration runs Fisher-scoring steps on beta at fixed alpha,
    then Newton steps on theta at fixed beta. Iteration stops once an outer
    iteration moves no coordinate by ``tol`` or more.
    """
    y = _check_counts(y)
    X = np.asarray(X, dtype=float)
    A = np.ones((len(y), 1)) if X.size == 0 else design_matrix(X)
    n, k = A.shape
    names = tuple(feature_names) if feature_names is not None else tuple(f"x{j + 1}" for j in range(k - 1))
    if n <= k:
        raise InsufficientDataError(f"need n > p + 1 observations, got n={n}, p={k - 1}")
    if np.all(y == 0):
        raise ModelDomainError("all counts are zero; the log-mean is unbounded")

    beta = _initial_beta(A, y)
    theta = math.log(_moment_alpha(A, beta, y))
    ll = log_likelihood(beta, theta, A, y)
    ll0 = ll
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        beta_start, theta_start = beta.copy(), theta
        for _ in range(inner_iter):
            prev = beta
            beta, ll = _beta_step(beta, theta, A, y, ll)
            if np.max(np.abs(beta - prev)) < tol * 1e-2:
                break
        for _ in range(inner_iter):
            prev = theta
            theta, ll = _theta_step(beta, theta, A, y, ll)
            if abs(theta - prev) < tol * 1e-2:
                break
        delta = max(float(np.max(np.abs(beta - beta_start))), abs(theta - theta_start))
        if delta < tol:
            converged = True
            break

    grad = score(beta, theta, A, y)
    clamped = theta <= THETA_MIN + 1e-12
    if clamped:
        grad[-1] = max(grad[-1], 0.0)  # projected: only an inward push counts at the bound
        warnings.warn(f"alpha driven to the lower bound {ALPHA_MIN:g} (data not overdispersed)",
                      DispersionWarning, stacklevel=2)
    gnorm = float(np.linalg.norm(grad))
    converged = converged and bool(np.isfinite(ll)) and gnorm <= 1e-6 * n

    se = np.full(k, np.nan)
    alpha_se = float("nan")
    try:
        cov = np.linalg.inv(-hessian(beta, theta, A, y))
        d = np.diag(cov)
        se = np.sqrt(np.where(d[:k] > 0, d[:k], np.nan))
        if d[k] > 0:
            alpha_se = math.exp(theta) * math.sqrt(d[k])  # delta method
    except np.linalg.LinAlgError:
        pass
    return Nb2Fit(beta, math.exp(theta), ll, it, converged, names, ll0, clamped, gnorm, se, alpha_se)


def fit_nb2(ds: AlignedDataset, **kwargs) -> Nb2Fit:
    return fit_nb2_arrays(ds.X, ds.y, ds.feature_names, **kwargs)


def predict_nb2(fit: Nb2Fit, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.shape[1] != len(fit.beta) - 1:
        raise ArgumentError(f"fit expects {len(fit.beta) - 1} feature column(s), got {X.shape[1]}")
    return np.exp(np.clip(fit.beta[0] + X @ fit.beta[1:], -ETA_MAX, ETA_MAX))
