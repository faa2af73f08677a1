"""Discounted temporal score archive and its weighted empirical CDF.

Scores are weighted geometrically by recency: the most recent score always
carries weight 1 and each step further back multiplies the weight by the
discount factor.  The archive keeps scores in arrival order because the
weights are order-sensitive; the CDF here is evaluated by direct summation,
which doubles as the correctness oracle for the incremental evaluation the
quantile engine uses internally.
"""

from __future__ import annotations

import numpy as np


def temporal_weight(i: int, t: int, beta: float) -> float:
    """Discount weight of the score observed at step ``i`` when standing at step ``t``.

    Equals beta ** (t - 1 - i): 1 for the most recent score (i = t - 1),
    shrinking geometrically with age.
    """
    if not (0.0 < beta < 1.0):
        raise ValueError(f"beta must lie in (0, 1), got {beta!r}")
    if not 0 <= i < t:
        raise ValueError(f"need 0 <= i < t, got i={i}, t={t}")
    return beta ** (t - 1 - i)


class TemporalArchive:
    """Arrival-ordered score history under a geometric discount."""

    def __init__(self, beta: float, scores=()):
        if not (0.0 < beta < 1.0):
            raise ValueError(f"beta must lie in (0, 1), got {beta!r}")
        self.beta = float(beta)
        self.scores: list[float] = [float(s) for s in scores]

    def __len__(self) -> int:
        return len(self.scores)

    @property
    def t(self) -> int:
        return len(self.scores)

    def append(self, score: float) -> None:
        if not score >= 0.0:
            raise ValueError(f"scores are nonnegative, got {score!r}")
        self.scores.append(float(score))

    def weights(self) -> np.ndarray:
        """Discount weights in arrival order, beta ** (t - 1 - i)."""
        t = len(self.scores)
        return np.power(self.beta, (t - 1) - np.arange(t, dtype=np.float64))

    def total_weight(self) -> float:
        """Closed-form total weight (1 - beta^t) / (1 - beta)."""
        t = len(self.scores)
        return (1.0 - self.beta**t) / (1.0 - self.beta)

    def total_weight_direct(self) -> float:
        """Total weight by direct summation; cross-checks the closed form."""
        return float(self.weights().sum())

    def cdf(self, r: float) -> float:
        """Discount-weighted fraction of archived scores <= r.

        Right-continuous step function of r, non-decreasing, reaching 1 once
        r covers the largest archived score.  Scores equal to r count as
        covered.
        """
        if not self.scores:
            raise ValueError("temporal CDF undefined on an empty archive; use the prior-only path")
        w = self.weights()
        covered = np.asarray(self.scores, dtype=np.float64) <= r
        return float(np.dot(w, covered) / w.sum())


def temporal_cdf(archive: TemporalArchive, r: float) -> float:
    """Functional form of ``TemporalArchive.cdf``."""
    return archive.cdf(r)
