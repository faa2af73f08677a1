"""Closed-form risk curve of the evidence-gated mixture.

With spatial evidence d_s, irreducible spatial variance v0 and temporal
squared structural bias m_t, the pointwise mean squared error of the gated
CDF mixture as a function of the gate constant K is

    mse(K) = (d_s * v0 + K^2 * m_t) / (d_s + K)^2

which is uniquely minimized at K* = v0 / m_t.  These are analytic
validators for the bias-variance sweep experiments; no quantity here is
estimated from data.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class RiskParams:
    d_s: float
    v0: float
    m_t: float

    def __post_init__(self):
        for name in ("d_s", "v0", "m_t"):
            v = getattr(self, name)
            if not v > 0.0:
                raise ValueError(f"{name} must be strictly positive, got {v!r}")


def mixture_mse(p: RiskParams, k: float) -> float:
    """Risk of the gated mixture at gate constant ``k``.

    Tends to v0 / d_s (pure spatial variance) as k -> 0 and to m_t (pure
    temporal bias) as k -> infinity.
    """
    if not k > 0.0:
        raise ValueError(f"k must be strictly positive, got {k!r}")
    return (p.d_s * p.v0 + k * k * p.m_t) / (p.d_s + k) ** 2


def optimal_k(v0: float, m_t: float) -> float:
    """The unique risk-minimizing gate constant, v0 / m_t."""
    if not v0 > 0.0:
        raise ValueError(f"v0 must be strictly positive, got {v0!r}")
    if not m_t > 0.0:
        raise ValueError(f"m_t must be strictly positive, got {m_t!r}")
    return v0 / m_t
