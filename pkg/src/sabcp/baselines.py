"""Comparison methods consuming the same (center, scale, y) stream.

ACI adjusts its working miscoverage level from coverage feedback,
alpha <- alpha + gamma * (target - err); AgACI and DtACI run one ACI expert
per step size on a fixed grid and aggregate them with exponential weights,
AgACI averaging the expert margins and DtACI averaging the expert levels.
The temporal-only predictor reuses the quantile engine with its spatial
side disabled, so it shares every code path with the state-adaptive one.
"""

from __future__ import annotations

import math
from collections import deque

from .core import IntervalForecast, SabcpConfig, nonconformity
from .engine import SabcpPredictor, prior_weight

GAMMA_GRID = (0.001, 0.005, 0.01, 0.05, 0.1)
DEFAULT_WINDOW = 250
DEFAULT_GAMMA = 0.01
ALPHA_CLAMP = 1e-3
# exponential-weights rate tuned for a 5-expert grid over ~2500 steps
AGGREGATION_ETA = math.sqrt(8.0 * math.log(5.0) / 2500.0)


def window_quantile_higher(sorted_scores, level: float) -> float:
    """Empirical quantile with higher interpolation.

    Smallest element whose rank reaches ceil(level * n); ranks are clamped
    into [1, n] so extreme working levels still return an archive element.
    """
    n = len(sorted_scores)
    if n == 0:
        raise ValueError("empty calibration window")
    rank = math.ceil(level * n)
    rank = min(max(rank, 1), n)
    return sorted_scores[rank - 1]


def pinball_loss(level: float, score: float, margin: float) -> float:
    """Pinball loss of a margin read as the level-quantile of the score."""
    if score >= margin:
        return level * (score - margin)
    return (1.0 - level) * (margin - score)


def _clamp_alpha(a: float) -> float:
    return min(max(a, ALPHA_CLAMP), 1.0 - ALPHA_CLAMP)


class AciPredictor:
    """Feedback-driven interval predictor with a sliding calibration window.

    Emits the (1 - alpha_t) window quantile as its margin; after each step
    the working level moves by gamma * (alpha - err). While the window is
    empty the margin falls back to the conservative score ceiling.
    """

    method = "aci"

    def __init__(
        self,
        alpha: float,
        gamma: float = DEFAULT_GAMMA,
        window: int = DEFAULT_WINDOW,
        r_max: float = 10.0,
        score_mode: str = "scaled",
    ):
        if not (0.0 < alpha < 1.0):
            raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
        if not gamma > 0.0:
            raise ValueError(f"gamma must be positive, got {gamma!r}")
        self.alpha = alpha
        self.gamma = gamma
        self.alpha_t = _clamp_alpha(alpha)
        self.window: deque[float] = deque(maxlen=window)
        self.r_max = r_max
        self.score_mode = score_mode
        self.steps_seen = 0
        self._max_score = 0.0
        self._last_margin_score: float | None = None

    def margin_score(self) -> float:
        if self.window:
            return window_quantile_higher(sorted(self.window), 1.0 - self.alpha_t)
        return max(self.r_max, self._max_score)

    def forecast(self, center: float, scale: float = 1.0, state=None) -> IntervalForecast:
        q = self.margin_score()
        self._last_margin_score = q
        margin = q * scale if self.score_mode == "scaled" else q
        return IntervalForecast(
            center=center,
            margin=margin,
            lower=center - margin,
            upper=center + margin,
            pi_s=0.0,
            d_s=0.0,
            lambda_t=prior_weight(self.steps_seen),
            q_hat=q,
        )

    def update(self, center: float, scale: float, y: float, state=None) -> float:
        if self._last_margin_score is None:
            raise RuntimeError("update before forecast")
        score = nonconformity(center, scale, y, self.score_mode)
        err = 1.0 if score > self._last_margin_score else 0.0
        self.alpha_t = _clamp_alpha(self.alpha_t + self.gamma * (self.alpha - err))
        self.window.append(score)
        self._max_score = max(self._max_score, score)
        self.steps_seen += 1
        self._last_margin_score = None
        return score

    def step(self, center: float, scale: float, y: float, state=None) -> IntervalForecast:
        fc = self.forecast(center, scale, state)
        self.update(center, scale, y, state)
        return fc


class _ExpertEnsemble:
    """Exponential-weights bookkeeping over per-gamma ACI experts."""

    def __init__(self, alpha, gammas, window, r_max, score_mode, eta):
        if not gammas:
            raise ValueError("need at least one expert gamma")
        self.alpha = alpha
        self.eta = eta
        self.experts = [
            AciPredictor(alpha, gamma=g, window=window, r_max=r_max, score_mode=score_mode)
            for g in gammas
        ]
        self.weights = [1.0 / len(self.experts)] * len(self.experts)

    def update_weights(self, losses) -> None:
        """Multiply by exp(-eta * loss) and renormalize to the simplex.

        Losses are shifted by their minimum before exponentiating; the
        shift cancels in the normalization and avoids underflow when one
        expert's cumulative loss runs far ahead of the best.
        """
        lo = min(losses)
        scaled = [w * math.exp(-self.eta * (l - lo)) for w, l in zip(self.weights, losses)]
        total = sum(scaled)
        self.weights = [w / total for w in scaled]


class AgAciPredictor:
    """Expert aggregation on the margin: emits the weight-averaged expert margin."""

    method = "agaci"

    def __init__(
        self,
        alpha: float,
        gammas=GAMMA_GRID,
        window: int = DEFAULT_WINDOW,
        r_max: float = 10.0,
        score_mode: str = "scaled",
        eta: float = AGGREGATION_ETA,
    ):
        self.alpha = alpha
        self.score_mode = score_mode
        self.ensemble = _ExpertEnsemble(alpha, gammas, window, r_max, score_mode, eta)
        self.steps_seen = 0
        self._pending: list[float] | None = None

    def forecast(self, center: float, scale: float = 1.0, state=None) -> IntervalForecast:
        margins = [e.margin_score() for e in self.ensemble.experts]
        for e, m in zip(self.ensemble.experts, margins):
            e._last_margin_score = m
        q = sum(w * m for w, m in zip(self.ensemble.weights, margins))
        self._pending = margins
        margin = q * scale if self.score_mode == "scaled" else q
        return IntervalForecast(
            center=center,
            margin=margin,
            lower=center - margin,
            upper=center + margin,
            pi_s=0.0,
            d_s=0.0,
            lambda_t=prior_weight(self.steps_seen),
            q_hat=q,
        )

    def update(self, center: float, scale: float, y: float, state=None) -> float:
        if self._pending is None:
            raise RuntimeError("update before forecast")
        score = nonconformity(center, scale, y, self.score_mode)
        level = 1.0 - self.alpha
        losses = [pinball_loss(level, score, m) for m in self._pending]
        self.ensemble.update_weights(losses)
        for e in self.ensemble.experts:
            e.update(center, scale, y)
        self._pending = None
        self.steps_seen += 1
        return score

    def step(self, center: float, scale: float, y: float, state=None) -> IntervalForecast:
        fc = self.forecast(center, scale, state)
        self.update(center, scale, y, state)
        return fc


class DtAciPredictor:
    """Expert aggregation on the level: one quantile read at the averaged alpha.

    All experts share a single calibration window; each expert's implied
    margin (its own-level quantile of that window) drives both its pinball
    loss and its coverage feedback. With a single expert this collapses to
    plain ACI, step for step.
    """

    method = "dtaci"

    def __init__(
        self,
        alpha: float,
        gammas=GAMMA_GRID,
        window: int = DEFAULT_WINDOW,
        r_max: float = 10.0,
        score_mode: str = "scaled",
        eta: float = AGGREGATION_ETA,
    ):
        self.alpha = alpha
        self.score_mode = score_mode
        self.window: deque[float] = deque(maxlen=window)
        self.r_max = r_max
        self._max_score = 0.0
        self.ensemble = _ExpertEnsemble(alpha, gammas, window, r_max, score_mode, eta)
        self.steps_seen = 0
        self._pending: list[float] | None = None

    def _quantile_at(self, sorted_window, level: float) -> float:
        if sorted_window:
            return window_quantile_higher(sorted_window, level)
        return max(self.r_max, self._max_score)

    def forecast(self, center: float, scale: float = 1.0, state=None) -> IntervalForecast:
        sorted_window = sorted(self.window)
        alpha_bar = sum(
            w * e.alpha_t for w, e in zip(self.ensemble.weights, self.ensemble.experts)
        )
        q = self._quantile_at(sorted_window, 1.0 - alpha_bar)
        self._pending = [
            self._quantile_at(sorted_window, 1.0 - e.alpha_t) for e in self.ensemble.experts
        ]
        margin = q * scale if self.score_mode == "scaled" else q
        return IntervalForecast(
            center=center,
            margin=margin,
            lower=center - margin,
            upper=center + margin,
            pi_s=0.0,
            d_s=0.0,
            lambda_t=prior_weight(self.steps_seen),
            q_hat=q,
        )

    def update(self, center: float, scale: float, y: float, state=None) -> float:
        if self._pending is None:
            raise RuntimeError("update before forecast")
        score = nonconformity(center, scale, y, self.score_mode)
        level = 1.0 - self.alpha
        losses = [pinball_loss(level, score, m) for m in self._pending]
        self.ensemble.update_weights(losses)
        for e, m in zip(self.ensemble.experts, self._pending):
            err = 1.0 if score > m else 0.0
            e.alpha_t = _clamp_alpha(e.alpha_t + e.gamma * (e.alpha - err))
            e.steps_seen += 1
        self.window.append(score)
        self._max_score = max(self._max_score, score)
        self._pending = None
        self.steps_seen += 1
        return score

    def step(self, center: float, scale: float, y: float, state=None) -> IntervalForecast:
        fc = self.forecast(center, scale, state)
        self.update(center, scale, y, state)
        return fc


class BcpPredictor(SabcpPredictor):
    """Temporal-only discounted predictor: the quantile engine with its gate pinned at 0.

    Accepts and ignores the state argument, so harness code can drive every
    method identically.
    """

    method = "bcp"

    def __init__(self, cfg: SabcpConfig):
        super().__init__(cfg, use_spatial=False)
