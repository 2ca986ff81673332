import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from oracles import nb2_pmf_mp, poisson_pmf
from trendcast.errors import ArgumentError, ModelDomainError
from trendcast.linreg import design_matrix
from trendcast.nbreg import (DispersionWarning, Nb2Fit, fit_nb2_arrays, fit_poisson, hessian,
                             log_likelihood, nb2_log_pmf, poisson_log_likelihood, predict_nb2, score)

TRUE_BETA = np.array([1.0, 0.5, -0.3])
TRUE_ALPHA = 0.4


def simulate(seed, n=500, beta=TRUE_BETA, alpha=TRUE_ALPHA):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, len(beta) - 1))
    mu = np.exp(beta[0] + X @ beta[1:])
    r = 1 / alpha
    y = rng.negative_binomial(r, r / (r + mu))
    return X, y.astype(float)


def test_pmf_sums_to_one_by_brute_force():
    mu, alpha = 5.0, 0.5
    ys = np.arange(0, 400)
    assert abs(np.exp(nb2_log_pmf(ys, mu, alpha)).sum() - 1) <= 1e-8


@pytest.mark.parametrize("y", [0, 1, 7, 40, 1000])
@pytest.mark.parametrize("mu,alpha", [(3.0, 0.2), (50.0, 2.0), (1e4, 0.05)])
def test_pmf_matches_high_precision_gamma_form(y, mu, alpha):
    ref = float(mpmath_log(nb2_pmf_mp(y, mu, alpha)))
    assert nb2_log_pmf(y, mu, alpha) == pytest.approx(ref, abs=1e-9)


def mpmath_log(v):
    import mpmath
    return mpmath.log(v)


def test_pmf_agrees_with_scipy_parameterisation():
    mu, alpha = 7.5, 0.3
    r = 1 / alpha
    ys = np.arange(60)
    np.testing.assert_allclose(np.exp(nb2_log_pmf(ys, mu, alpha)), stats.nbinom.pmf(ys, r, r / (r + mu)),
                               rtol=1e-11)


def test_poisson_limit():
    for y in range(21):
        assert math.exp(nb2_log_pmf(y, 3.0, 1e-8)) == pytest.approx(poisson_pmf(y, 3.0), abs=1e-5)


def test_zero_count_closed_form():
    mu, alpha = 4.0, 0.7
    assert nb2_log_pmf(0, mu, alpha) == pytest.approx(-math.log1p(alpha * mu) / alpha, rel=1e-14)


def test_pmf_stays_finite_for_large_arguments():
    assert np.isfinite(nb2_log_pmf(10**6, 10**6, 1e-3))
    assert np.isfinite(nb2_log_pmf(10**6, 1.0, 5.0))


@pytest.mark.parametrize("args", [(-1, 1, 1), (1.5, 1, 1), (1, 0, 1), (1, 1, 0), (1, 1, -2)])
def test_pmf_domain(args):
    with pytest.raises(ArgumentError):
        nb2_log_pmf(*args)


def test_score_matches_finite_differences():
    X, y = simulate(5, n=80)
    A = design_matrix(X)
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(20):
        beta = TRUE_BETA + 0.3 * rng.normal(size=3)
        theta = math.log(TRUE_ALPHA) + 0.5 * rng.normal()
        g = score(beta, theta, A, y)
        num = np.empty(4)
        h = 1e-5
        for j in range(4):
            e = np.zeros(4)
            e[j] = h
            f = lambda v: log_likelihood(v[:3], v[3], A, y)
            v0 = np.append(beta, theta)
            num[j] = (f(v0 + e) - f(v0 - e)) / (2 * h)
        worst = max(worst, np.linalg.norm(g - num) / np.linalg.norm(num))
    assert worst <= 1e-6


def test_hessian_matches_finite_differences_of_score():
    X, y = simulate(6, n=60)
    A = design_matrix(X)
    beta, theta = TRUE_BETA + 0.1, math.log(0.5)
    H = hessian(beta, theta, A, y)
    h = 1e-6
    v0 = np.append(beta, theta)
    num = np.empty((4, 4))
    for j in range(4):
        e = np.zeros(4)
        e[j] = h
        num[:, j] = (score(*(lambda v: (v[:3], v[3]))(v0 + e), A, y)
                     - score(*(lambda v: (v[:3], v[3]))(v0 - e), A, y)) / (2 * h)
    assert np.linalg.norm(H - num) / np.linalg.norm(num) < 1e-6
    np.testing.assert_allclose(H, H.T, rtol=1e-12)


def test_recovery_single_seed():
    X, y = simulate(0)
    fit = fit_nb2_arrays(X, y)
    assert fit.converged
    assert np.all(np.abs(fit.beta - TRUE_BETA) <= 3 * fit.std_errors)
    assert abs(fit.alpha / TRUE_ALPHA - 1) <= 0.3
    assert abs(predict_nb2(fit, X).mean() / y.mean() - 1) <= 0.05


def test_converged_fit_has_small_score_and_ascends():
    X, y = simulate(1)
    fit = fit_nb2_arrays(X, y)
    assert fit.converged and fit.score_norm <= 1e-6 * len(y)
    assert fit.log_likelihood >= fit.initial_log_likelihood


def test_constant_counts_clamp_alpha():
    y = np.full(30, 20.0)
    with pytest.warns(DispersionWarning):
        fit = fit_nb2_arrays(np.empty((30, 0)), y)
    assert fit.beta[0] == pytest.approx(math.log(20), abs=1e-8)
    assert fit.alpha_clamped and fit.alpha == pytest.approx(1e-8)
    assert fit.converged


def test_poisson_data_nesting():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(300, 1))
    y = rng.poisson(np.exp(1.5 + 0.4 * X[:, 0])).astype(float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DispersionWarning)
        fit = fit_nb2_arrays(X, y)
    pbeta = fit_poisson(design_matrix(X), y)[0]
    assert fit.log_likelihood >= poisson_log_likelihood(pbeta, design_matrix(X), y) - 1e-6


def test_centering_features_leaves_fitted_means_unchanged():
    X, y = simulate(2, n=200)
    a = fit_nb2_arrays(X, y)
    Xc = X - X.mean(axis=0)
    b = fit_nb2_arrays(Xc, y)
    np.testing.assert_allclose(predict_nb2(a, X), predict_nb2(b, Xc), rtol=1e-8)


@pytest.mark.parametrize("y", [[1.5, 2, 3, 4, 5], [-1, 2, 3, 4, 5], [0, 0, 0, 0, 0]])
def test_non_count_targets_rejected(y):
    with pytest.raises(ModelDomainError):
        fit_nb2_arrays(np.arange(5.0).reshape(-1, 1), np.array(y, dtype=float))


def test_non_convergence_is_reported():
    X, y = simulate(3, n=100)
    fit = fit_nb2_arrays(X, y, max_iter=1, inner_iter=1)
    assert fit.converged is False


def test_predict_examples():
    X = np.random.default_rng(0).normal(size=(5, 2))
    zero = Nb2Fit(np.zeros(3), 1.0, 0.0, 1, True)
    np.testing.assert_allclose(predict_nb2(zero, X), 1.0)
    ten = Nb2Fit(np.array([math.log(10), 0, 0]), 1.0, 0.0, 1, True)
    np.testing.assert_allclose(predict_nb2(ten, X), 10.0)
    with pytest.raises(ArgumentError):
        predict_nb2(ten, X[:, :1])


def test_json_round_trip():
    X, y = simulate(9, n=120)
    fit = fit_nb2_arrays(X, y, ["a", "b"])
    back = Nb2Fit.from_json(fit.to_json())
    np.testing.assert_array_equal(back.beta, fit.beta)
    assert back.alpha == fit.alpha and back.feature_names == ("a", "b")


@given(st.floats(0.5, 200), st.floats(0.05, 3))
def test_pmf_normalises_property(mu, alpha):
    r = 1 / alpha
    hi = int(stats.nbinom.ppf(1 - 1e-13, r, r / (r + mu))) + 50
    total = np.exp(nb2_log_pmf(np.arange(hi), mu, alpha)).sum()
    assert abs(total - 1) <= 1e-8
