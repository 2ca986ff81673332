"""Seeded synthetic trends/cases data with a known dependence on the trends.

Each trend is an AR(1) signal mapped into [0, 100]. Daily counts are
negative-binomial draws whose log-mean is a weighted sum of yesterday's
trend levels, so search interest carries information about today's count
that yesterday's count alone does not.
"""
from __future__ import annotations

import datetime as dt

import numpy as np

from .core import CaseSeries, TrendSeries

START = dt.date(2020, 1, 20)


def make_synthetic(seed: int, n_days: int = 400, n_terms: int = 5, phi: float = 0.7,
                   level: float = 6.0, strength: float = 0.25, dispersion: float = 0.05,
                   start: dt.date = START):
    rng = np.random.default_rng(seed)
    burn = 100
    total = burn + n_days
    z = np.zeros((n_terms, total))
    for t in range(1, total):
        z[:, t] = phi * z[:, t - 1] + np.sqrt(1 - phi ** 2) * rng.standard_normal(n_terms)
    weights = rng.uniform(0.5, 1.0, n_terms)
    days = np.arange(burn, total)
    eta = level + strength * (weights @ z[:, days - 1])
    mu = np.exp(eta)
    r = 1.0 / dispersion
    y = rng.negative_binomial(r, r / (r + mu))
    current = z[:, days]
    dates = [start + dt.timedelta(days=i) for i in range(n_days)]
    trends = []
    for j in range(n_terms):
        v = current[j]
        scaled = np.round(100.0 * (v - v.min()) / (v.max() - v.min()))
        trends.append(TrendSeries(f"term{j + 1}", "", tuple(zip(dates, scaled))))
    cases = CaseSeries("synthetic", tuple(zip(dates, (int(c) for c in y))))
    return trends, cases
