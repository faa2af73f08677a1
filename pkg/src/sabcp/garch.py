"""Online GARCH(1,1) volatility base model with variance targeting.

Supplies the point forecast (zero conditional mean for return streams) and
the conditional volatility used to scale nonconformity scores.  Coefficients
are fixed after initialization; only the variance recursion runs online, so
every conformal wrapper sees an identical, deterministic base.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

DEFAULT_ARCH = 0.05
DEFAULT_GARCH = 0.90
MIN_WARMUP = 30
VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class GarchState:
    """Recursion parameters and the current conditional variance."""

    omega: float
    a: float
    b: float
    sigma2: float


def garch_init(warmup, a: float = DEFAULT_ARCH, b: float = DEFAULT_GARCH) -> GarchState:
    """Initialize by variance targeting on a warmup window.

    omega = var(warmup) * (1 - a - b), so the recursion's long-run variance
    matches the warmup sample variance, which also seeds sigma2.
    """
    arr = np.asarray(warmup, dtype=np.float64)
    if arr.ndim != 1 or arr.size < MIN_WARMUP:
        raise ValueError(f"warmup needs at least {MIN_WARMUP} returns, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("warmup returns must be finite")
    if not (a >= 0.0 and b >= 0.0):
        raise ValueError(f"coefficients must be nonnegative, got a={a!r}, b={b!r}")
    if not a + b < 1.0:
        raise ValueError(f"stationarity requires a + b < 1, got {a + b!r}")
    if np.all(arr == arr[0]):
        raise ValueError("warmup variance is zero (constant returns); cannot target")
    var = float(arr.var(ddof=1))
    if not var > 0.0:
        raise ValueError("warmup variance is zero (constant returns); cannot target")
    return GarchState(omega=var * (1.0 - a - b), a=a, b=b, sigma2=var)


def garch_step(state: GarchState, r: float):
    """One predict-then-update move of the variance recursion.

    Emits (center, scale) from the PRE-update state, center = 0 and
    scale = sqrt(sigma2), then advances sigma2 <- omega + a r^2 + b sigma2
    with a small positive floor.  Returns (center, scale, next_state).
    """
    if not (isinstance(r, (int, float)) and math.isfinite(r)):
        raise ValueError(f"return must be finite, got {r!r}")
    scale = math.sqrt(state.sigma2)
    nxt = max(state.omega + state.a * r * r + state.b * state.sigma2, VARIANCE_FLOOR)
    return 0.0, scale, replace(state, sigma2=nxt)


class GarchModel:
    """Stateful wrapper around the functional recursion."""

    def __init__(self, state: GarchState):
        self.state = state

    @classmethod
    def from_warmup(cls, warmup, a: float = DEFAULT_ARCH, b: float = DEFAULT_GARCH,
                    replay: bool = True):
        """Fit on the warmup window; with ``replay`` the recursion is then run
        through the warmup returns so sigma2 reflects the most recent shocks.

        Returns (model, warmup_scales): the per-step conditional volatilities
        observed during the replay (empty without replay).
        """
        state = garch_init(warmup, a, b)
        scales: list[float] = []
        if replay:
            for r in np.asarray(warmup, dtype=np.float64):
                _, scale, state = garch_step(state, float(r))
                scales.append(scale)
        return cls(state), scales

    def forecast(self):
        """(center, scale) for the upcoming step, no mutation."""
        return 0.0, math.sqrt(self.state.sigma2)

    def update(self, r: float) -> None:
        _, _, self.state = garch_step(self.state, r)
