"""Shared domain types and the predict-then-update stream protocol.

Every interval method in this package is an online state machine driven one
observation at a time: the forecast for step t is produced first, from
history strictly before t, and only then is the revealed target folded into
the method's archives. ``stream_step`` enforces that ordering and the input
guards; the dataclasses here are the currency every module trades in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

SCORE_MODES = ("absolute", "scaled")


class SabcpError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(SabcpError):
    """Configuration rejected before any stream runs.

    ``problems`` lists one human-readable message per violated field.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration: " + "; ".join(self.problems))


class ProtocolError(SabcpError):
    """Predict-then-update contract violation (bad step index or target)."""


class DataError(SabcpError):
    """Unusable input data (malformed CSV, short series, bad synthetic spec)."""


@dataclass(frozen=True)
class Observation:
    """One time step of the raw input stream.

    ``features`` carries exogenous per-step inputs known before ``y`` is
    revealed (e.g. the synthetic generator's regime feature). Financial
    pipelines derive their state from lagged targets instead and leave it
    ``None``.
    """

    t: int
    y: float
    features: np.ndarray | None = None


@dataclass(frozen=True)
class IntervalForecast:
    """A symmetric prediction interval plus the diagnostics that produced it.

    ``margin`` is the half-width in target units; ``q_hat`` is the same
    quantile on the nonconformity-score scale (they coincide in absolute
    score mode and differ by the volatility scale otherwise).
    """

    center: float
    margin: float
    lower: float
    upper: float
    pi_s: float
    d_s: float
    lambda_t: float
    q_hat: float

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class SabcpConfig:
    """Knobs of the state-adaptive predictor.

    alpha           target miscoverage rate, in (0, 1)
    beta            temporal discount factor, in (0, 1)
    k               target matching number of the evidence gate, > 0
    r_max           upper bound of the uniform score prior, > 0
    state_dim       dimension of the spatial state vector
    history_cap     optional cap on archived (score, state) pairs
    score_mode      "absolute" (raw residual) or "scaled" (residual / scale)
    bandwidth_floor lower bound substituted for a zero per-dim deviation
    solver_tol      bisection width tolerance, relative to the search ceiling
    solver_max_iter bisection iteration cap
    """

    alpha: float = 0.1
    beta: float = 0.99
    k: float = 1.0
    r_max: float = 10.0
    state_dim: int = 1
    history_cap: int | None = None
    score_mode: str = "scaled"
    bandwidth_floor: float = 1e-8
    solver_tol: float = 1e-12
    solver_max_iter: int = 200


def validate_config(cfg: SabcpConfig) -> SabcpConfig:
    """Return ``cfg`` unchanged iff every field invariant holds.

    Raises ``ConfigError`` listing every violated field, so callers see the
    whole damage at once instead of fixing fields one by one.
    """
    problems = []
    if not (isinstance(cfg.alpha, (int, float)) and 0.0 < cfg.alpha < 1.0):
        problems.append(f"alpha must lie strictly inside (0, 1), got {cfg.alpha!r}")
    if not (isinstance(cfg.beta, (int, float)) and 0.0 < cfg.beta < 1.0):
        problems.append(f"beta must lie strictly inside (0, 1), got {cfg.beta!r}")
    if not (isinstance(cfg.k, (int, float)) and cfg.k > 0.0 and math.isfinite(cfg.k)):
        problems.append(f"k must be a positive finite real, got {cfg.k!r}")
    if not (isinstance(cfg.r_max, (int, float)) and cfg.r_max > 0.0 and math.isfinite(cfg.r_max)):
        problems.append(f"r_max must be a positive finite real, got {cfg.r_max!r}")
    if not (isinstance(cfg.state_dim, int) and cfg.state_dim >= 1):
        problems.append(f"state_dim must be a positive integer, got {cfg.state_dim!r}")
    if cfg.history_cap is not None and not (isinstance(cfg.history_cap, int) and cfg.history_cap >= 1):
        problems.append(f"history_cap must be a positive integer or None, got {cfg.history_cap!r}")
    if cfg.score_mode not in SCORE_MODES:
        problems.append(f"score_mode must be one of {SCORE_MODES}, got {cfg.score_mode!r}")
    if not (isinstance(cfg.bandwidth_floor, (int, float)) and cfg.bandwidth_floor > 0.0):
        problems.append(f"bandwidth_floor must be positive, got {cfg.bandwidth_floor!r}")
    if not (isinstance(cfg.solver_tol, (int, float)) and cfg.solver_tol > 0.0):
        problems.append(f"solver_tol must be positive, got {cfg.solver_tol!r}")
    if not (isinstance(cfg.solver_max_iter, int) and cfg.solver_max_iter >= 1):
        problems.append(f"solver_max_iter must be a positive integer, got {cfg.solver_max_iter!r}")
    if problems:
        raise ConfigError(problems)
    return cfg


def nonconformity(center: float, scale: float, y: float, mode: str = "absolute") -> float:
    """Nonconformity score of an observed target against a point forecast.

    Absolute mode: |y - center|.  Scaled mode: |y - center| / scale, which
    puts scores from heteroskedastic streams on a common footing.
    """
    if mode == "absolute":
        return abs(y - center)
    if mode == "scaled":
        if not (scale > 0.0):
            raise ValueError(f"scaled mode needs a positive scale, got {scale!r}")
        return abs(y - center) / scale
    raise ValueError(f"unknown score_mode {mode!r}")


@runtime_checkable
class StreamPredictor(Protocol):
    """Anything that can be driven by ``stream_step``."""

    steps_seen: int

    def step(self, obs: Observation) -> IntervalForecast: ...


def stream_step(predictor: StreamPredictor, obs: Observation) -> IntervalForecast:
    """Advance ``predictor`` by one observation under the stream contract.

    The forecast for step t uses only information from steps < t; after it
    is emitted, ``obs.y`` is folded into the predictor's archives.  A
    non-monotone step index or a non-finite target is rejected before the
    predictor is touched, so its state stays unchanged on error.
    """
    if obs.t != predictor.steps_seen:
        raise ProtocolError(
            f"non-monotone step index: expected t={predictor.steps_seen}, got t={obs.t}"
        )
    if not (isinstance(obs.y, (int, float)) and math.isfinite(obs.y)):
        raise ProtocolError(f"target must be finite, got {obs.y!r} at t={obs.t}")
    return predictor.step(obs)
