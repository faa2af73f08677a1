"""Shared fixtures and independent oracles for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from sabcp.data import VolRegimeSpec, vol_regime_stream


def two_sample_ks(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic, sort-based."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / a.size
    cdf_b = np.searchsorted(b, pooled, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def mixture_on_grid(scores, weights_t, kernel_w, pi, lam, r_max, grid):
    """Vectorized mixture CDF over a grid of thresholds.

    Independent of the package's solvers: plain sorting plus cumulative
    sums over the defining weighted-indicator ratios.
    """
    scores = np.asarray(scores, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    order = np.argsort(scores, kind="stable")
    s_sorted = scores[order]
    pos = np.searchsorted(s_sorted, grid, side="right")

    def cdf_part(w):
        w = np.asarray(w, dtype=np.float64)[order]
        cum = np.concatenate([[0.0], np.cumsum(w)])
        return cum[pos] / cum[-1]

    empirical = np.zeros_like(grid)
    if scores.size:
        empirical = (1.0 - pi) * cdf_part(weights_t)
        if pi > 0.0:
            empirical += pi * cdf_part(kernel_w)
    prior = np.minimum(grid / r_max, 1.0)
    return (1.0 - lam) * empirical + lam * prior


def clustered_price_csv(path, seed: int, n_days: int = 2520, base_vol: float = 1.2,
                        storm_mult: float = 3.5, p_calm_stay: float = 0.985,
                        p_storm_stay: float = 0.94, start_date=(2016, 1, 1)) -> None:
    """Write a synthetic daily close CSV with strong volatility clustering.

    A two-state Markov volatility chain drives percent log-returns; prices
    are exp-cumulated from 100. The regime switches are abrupt, which a
    smooth variance recursion tracks only with lag.
    """
    from datetime import date, timedelta

    rng = np.random.default_rng(seed)
    storm = False
    rets = np.empty(n_days - 1)
    for i in range(n_days - 1):
        stay = p_storm_stay if storm else p_calm_stay
        if rng.uniform() > stay:
            storm = not storm
        vol = base_vol * (storm_mult if storm else 1.0)
        rets[i] = vol * rng.standard_normal()
    closes = 100.0 * np.exp(np.concatenate([[0.0], np.cumsum(rets / 100.0)]))
    d0 = date(*start_date)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("date,close\n")
        for i, c in enumerate(closes):
            fh.write(f"{(d0 + timedelta(days=i)).isoformat()},{float(c)!r}\n")


@pytest.fixture
def vol_stream():
    """A medium mixed-volatility stream with noisy regime features."""
    return vol_regime_stream(VolRegimeSpec(total_steps=600, seed=7))
