"""Interval evaluation: coverage, width, and the Winkler interval score.

All functions are pure over immutable records, so aggregation parallelizes
trivially. Coverage uses closed intervals (a boundary hit counts as
covered). High-volatility conditioning marks the steps whose target
magnitude lands in the top decile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import IntervalForecast

HIGH_VOL_FRACTION = 0.1


def winkler(lower: float, upper: float, y: float, alpha: float) -> float:
    """Interval score: width plus (2/alpha)-scaled penalty for a miss.

    Strictly proper for central (1 - alpha) intervals; covered points pay
    exactly the width.
    """
    if upper < lower:
        raise ValueError(f"inverted interval [{lower!r}, {upper!r}]")
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    score = upper - lower
    if y < lower:
        score += (2.0 / alpha) * (lower - y)
    elif y > upper:
        score += (2.0 / alpha) * (y - upper)
    return score


@dataclass(frozen=True)
class StepRecord:
    """One evaluated step: the interval, its outcome, and the gate diagnostics."""

    t: int
    y: float
    lower: float
    upper: float
    covered: bool
    width: float
    winkler: float
    pi_s: float
    d_s: float
    lambda_t: float
    q_hat: float


def make_record(t: int, y: float, fc: IntervalForecast, alpha: float) -> StepRecord:
    return StepRecord(
        t=t,
        y=y,
        lower=fc.lower,
        upper=fc.upper,
        covered=fc.lower <= y <= fc.upper,
        width=fc.upper - fc.lower,
        winkler=winkler(fc.lower, fc.upper, y, alpha),
        pi_s=fc.pi_s,
        d_s=fc.d_s,
        lambda_t=fc.lambda_t,
        q_hat=fc.q_hat,
    )


def high_vol_mask(ys, fraction: float = HIGH_VOL_FRACTION, mode: str = "full") -> np.ndarray:
    """Mark the steps whose |y| reaches the top ``fraction`` magnitude rank.

    ``full`` (the default) ranks against the whole window in hindsight: the
    threshold is the ceil(fraction * T)-th largest |y| and every tie at the
    threshold is marked. ``expanding`` applies the same rule to |y_0..y_t|
    per step, for rolling-style reports.
    """
    a = np.abs(np.asarray(ys, dtype=np.float64))
    n = a.size
    if n == 0:
        raise ValueError("empty evaluation window")
    if not (0.0 < fraction <= 1.0):
        raise ValueError(f"fraction must lie in (0, 1], got {fraction!r}")
    if mode == "full":
        k = math.ceil(fraction * n)
        threshold = np.partition(a, n - k)[n - k]
        return a >= threshold
    if mode == "expanding":
        out = np.empty(n, dtype=bool)
        for t in range(n):
            k = math.ceil(fraction * (t + 1))
            threshold = np.partition(a[: t + 1], t + 1 - k)[t + 1 - k]
            out[t] = a[t] >= threshold
        return out
    raise ValueError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class RunReport:
    """Aggregate metrics for one (method, dataset, alpha) cell.

    High-volatility fields are None when the mask selects nothing, rather
    than a misleading zero.
    """

    marginal_coverage: float
    high_vol_coverage: float | None
    avg_width: float
    avg_winkler: float
    n_steps: int
    n_high_vol: int


def aggregate(records, mask=None) -> RunReport:
    """Arithmetic means of the per-step fields, high-vol ones on the masked subset."""
    if not records:
        raise ValueError("no records to aggregate")
    covered = np.asarray([r.covered for r in records], dtype=np.float64)
    widths = np.asarray([r.width for r in records], dtype=np.float64)
    winklers = np.asarray([r.winkler for r in records], dtype=np.float64)
    if mask is None:
        mask = high_vol_mask([r.y for r in records])
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != covered.shape:
        raise ValueError(f"mask length {mask.size} != record count {covered.size}")
    n_high = int(mask.sum())
    high_cov = float(covered[mask].mean()) if n_high else None
    return RunReport(
        marginal_coverage=float(covered.mean()),
        high_vol_coverage=high_cov,
        avg_width=float(widths.mean()),
        avg_winkler=float(winklers.mean()),
        n_steps=len(records),
        n_high_vol=n_high,
    )
