"""Evidence gate, prior-mixed CDF, and the bisection quantile solver.

The mixture CDF blends three ingredients: the state-conditional spatial CDF,
the recency-discounted temporal CDF, and a uniform prior on [0, R] whose
weight decays like 1/sqrt(1 + t). The spatial share is gated by the
accumulated kernel evidence through pi = D / (D + K): scarce evidence routes
the mass to the temporal base, abundant evidence routes it to the spatial
memory. The interval margin is the smallest r at which the mixture reaches
1 - alpha, located by bisection (the mixture is non-decreasing, and strictly
increasing on [0, R] whenever the prior weight is positive).

``QuantileEngine`` is the streaming implementation: it keeps the archives in
incrementally sorted form so each step costs one pass over history for the
weights plus logarithmic CDF lookups inside the solver. Its values are held
to the direct-summation evaluators in ``temporal`` and ``spatial`` by
equivalence tests.
"""

from __future__ import annotations

import math
from bisect import bisect_right, insort
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (
    IntervalForecast,
    SabcpConfig,
    nonconformity,
    validate_config,
)
from .spatial import OnlineMoments, bandwidth


def spatial_proportion(d_s: float, k: float) -> float:
    """Evidence gate pi = d_s / (d_s + k).

    0 at zero evidence, 0.5 when evidence matches k, approaching 1 as the
    evidence dwarfs k; strictly increasing in d_s.
    """
    if not d_s >= 0.0:
        raise ValueError(f"evidence must be nonnegative, got {d_s!r}")
    if not k > 0.0:
        raise ValueError(f"k must be positive, got {k!r}")
    return d_s / (d_s + k)


def prior_weight(t: int) -> float:
    """Decaying weight 1 / sqrt(1 + t) of the uniform prior; 1 at t = 0."""
    if t < 0:
        raise ValueError(f"step index must be nonnegative, got {t}")
    return 1.0 / math.sqrt(1.0 + t)


@dataclass
class MixtureQuery:
    """One step's frozen view of the mixture CDF ingredients.

    ``temporal`` and ``spatial`` are CDF evaluators over the current
    archives (``None`` when the corresponding archive is empty);
    ``score_ceiling`` is the largest archived score, 0 with no history.
    """

    pi_s: float
    lambda_t: float
    r_max: float
    temporal: Callable[[float], float] | None = None
    spatial: Callable[[float], float] | None = None
    score_ceiling: float = 0.0


def mixture_cdf(q: MixtureQuery, r: float) -> float:
    """Evaluate (1-lam) * [pi * F_S(r) + (1-pi) * F_T(r)] + lam * min(r/R, 1).

    With both archives empty the bracketed term is defined as 0 and the
    prior alone governs (the cold-start step, where lam = 1 anyway). The
    prior contributes a constant lam beyond R, taken literally.
    """
    if q.pi_s > 0.0 and q.spatial is None:
        raise ValueError("positive spatial proportion with zero spatial evidence")
    prior = min(r / q.r_max, 1.0) if r < q.r_max else 1.0
    empirical = 0.0
    if q.temporal is not None:
        empirical = (1.0 - q.pi_s) * q.temporal(r)
    if q.pi_s > 0.0:
        empirical += q.pi_s * q.spatial(r)
    return (1.0 - q.lambda_t) * empirical + q.lambda_t * prior


def bisect_smallest(
    f: Callable[[float], float],
    target: float,
    upper: float,
    tol_abs: float,
    max_iter: int,
    f_upper: float | None = None,
    f_zero: float | None = None,
) -> float:
    """Smallest x in [0, upper] with f(x) >= target, for non-decreasing f.

    Pure bisection: unconditionally convergent on monotone functions.
    Returns ``upper`` when even f(upper) falls short (the conservative
    fallback), and the invariant f(result) >= target holds otherwise.
    ``f_upper`` / ``f_zero`` let callers reuse endpoint evaluations across
    several targets.
    """
    if (f(upper) if f_upper is None else f_upper) < target:
        return upper
    if (f(0.0) if f_zero is None else f_zero) >= target:
        return 0.0
    lo, hi = 0.0, upper
    for _ in range(max_iter):
        if hi - lo <= tol_abs:
            break
        mid = 0.5 * (lo + hi)
        if f(mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi


def solve_quantile(
    q: MixtureQuery,
    alpha: float,
    *,
    tol: float = 1e-12,
    max_iter: int = 200,
) -> float:
    """Quantile margin: smallest r with mixture_cdf(q, r) >= 1 - alpha.

    The search ceiling is max(R, largest archived score); archived scores
    above R would otherwise leave the mixture short of 1 - alpha and the
    ceiling itself is returned as the conservative bound.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    upper = max(q.r_max, q.score_ceiling)
    return bisect_smallest(lambda r: mixture_cdf(q, r), 1.0 - alpha, upper, tol * upper, max_iter)


class _SortedView:
    """Ascending view of a score sequence with its arrival permutation.

    ``vals`` is a plain list so the solver's positional lookups stay cheap;
    ``order`` maps each sorted slot back to the arrival index so per-step
    weight vectors (computed in arrival order) can be re-sorted with one
    fancy index. Ties insert after their equals, so two views fed the same
    value sequence end up with identical permutations.
    """

    __slots__ = ("vals", "_order", "n")

    def __init__(self):
        self.vals: list[float] = []
        self._order = np.empty(256, dtype=np.intp)
        self.n = 0

    @property
    def order(self) -> np.ndarray:
        return self._order[: self.n]

    def insert(self, value: float, arrival: int) -> None:
        pos = bisect_right(self.vals, value)
        self.vals.insert(pos, value)
        if self.n == len(self._order):
            self._order = np.concatenate([self._order, np.empty_like(self._order)])
        self._order[pos + 1 : self.n + 1] = self._order[pos : self.n]
        self._order[pos] = arrival
        self.n += 1

    def rebuild(self, values) -> None:
        idx = np.argsort(values, kind="stable")
        self.n = len(idx)
        if self.n > len(self._order):
            self._order = np.empty(2 * self.n, dtype=np.intp)
        self._order[: self.n] = idx
        self.vals = [float(values[i]) for i in idx]


@dataclass
class StepContext:
    """Everything the solver needs for one forecast step, frozen pre-update."""

    t: int
    lambda_t: float
    pi_s: float
    d_s: float
    upper: float
    cdf: Callable[[float], float]
    bandwidth: np.ndarray | None = None
    f_upper: float = 1.0
    f_zero: float = 0.0


class QuantileEngine:
    """Streaming archives plus the per-step mixture solver.

    With ``use_spatial=False`` the spatial machinery is skipped entirely and
    the gate is pinned at 0, which is exactly the temporal-only baseline;
    the state-adaptive predictor and that baseline therefore share every
    code path below.
    """

    def __init__(self, cfg: SabcpConfig, use_spatial: bool = True):
        self.cfg = validate_config(cfg)
        self.use_spatial = use_spatial
        self.count = 0
        self.max_score = 0.0
        # temporal side: raw arrival order + decayed weights + sorted view
        self._raw_scores: list[float] = []
        self._wbuf = np.empty(256)
        self._tsorted = _SortedView()
        # spatial side: warm (state, score) pairs in arrival order
        self._smat = np.empty((256, cfg.state_dim))
        self._warm = 0
        self._warm_scores: list[float] = []
        self._warm_global: list[int] = []
        self._ssorted = _SortedView()
        self.moments = OnlineMoments.zeros(cfg.state_dim)

    # -- forecast side -----------------------------------------------------

    def prepare(self, state=None) -> StepContext:
        """Build the step's frozen CDF view for the current archives.

        ``state`` is the query state vector, or None when no spatial
        conditioning applies (cold state, or the temporal-only baseline).
        Does not mutate the engine.
        """
        cfg = self.cfg
        t = self.count
        lam = prior_weight(t)
        r_max = cfg.r_max

        cum_t_np = None
        total_t = 1.0
        if t > 0:
            cum_t_np = np.cumsum(self._wbuf[:t][self._tsorted.order])
            total_t = float(cum_t_np[-1])
        vals_t = self._tsorted.vals

        pi = 0.0
        d_s = 0.0
        cum_s_np = None
        total_s = 1.0
        h = None
        if state is not None:
            state = np.asarray(state, dtype=np.float64)
            if state.shape != (cfg.state_dim,):
                raise ValueError(
                    f"dimension mismatch: expected state of shape ({cfg.state_dim},), got {state.shape}"
                )
        if self.use_spatial and state is not None and self._warm > 0:
            h = bandwidth(self.moments, cfg.bandwidth_floor)
            z = (self._smat[: self._warm] - state) / h
            kernel = np.exp(-0.5 * np.einsum("ij,ij->i", z, z))
            cum_s_np = np.cumsum(kernel[self._ssorted.order])
            d_s = float(cum_s_np[-1])
            if d_s > 0.0:
                pi = spatial_proportion(d_s, cfg.k)
                total_s = d_s

        upper = max(r_max, self.max_score)
        coef_t = (1.0 - lam) * (1.0 - pi) / total_t
        coef_s = (1.0 - lam) * pi / total_s

        if cum_t_np is None:
            # cold start: the prior alone
            def cdf(r: float) -> float:
                return lam * (r / r_max) if r < r_max else lam

        elif d_s > 0.0 and self._warm == t:
            # every archived score is warm, so the two sorted views share one
            # permutation and the two weighted sums collapse into one lookup
            mix = (coef_t * cum_t_np + coef_s * cum_s_np).tolist()

            def cdf(r: float) -> float:
                acc = lam * (r / r_max) if r < r_max else lam
                p = bisect_right(vals_t, r)
                if p:
                    acc += mix[p - 1]
                return acc

        elif d_s > 0.0:
            cum_t = (coef_t * cum_t_np).tolist()
            cum_s = (coef_s * cum_s_np).tolist()
            vals_s = self._ssorted.vals

            def cdf(r: float) -> float:
                acc = lam * (r / r_max) if r < r_max else lam
                p = bisect_right(vals_t, r)
                if p:
                    acc += cum_t[p - 1]
                p = bisect_right(vals_s, r)
                if p:
                    acc += cum_s[p - 1]
                return acc

        else:
            cum_t = (coef_t * cum_t_np).tolist()

            def cdf(r: float) -> float:
                acc = lam * (r / r_max) if r < r_max else lam
                p = bisect_right(vals_t, r)
                if p:
                    acc += cum_t[p - 1]
                return acc

        return StepContext(
            t=t,
            lambda_t=lam,
            pi_s=pi,
            d_s=d_s,
            upper=upper,
            cdf=cdf,
            bandwidth=h,
            f_upper=cdf(upper),
            f_zero=cdf(0.0),
        )

    def solve(self, ctx: StepContext, alpha: float) -> float:
        """Margin for ``alpha`` under the frozen step view."""
        if not (0.0 < alpha < 1.0):
            raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
        return bisect_smallest(
            ctx.cdf,
            1.0 - alpha,
            ctx.upper,
            self.cfg.solver_tol * ctx.upper,
            self.cfg.solver_max_iter,
            f_upper=ctx.f_upper,
            f_zero=ctx.f_zero,
        )

    # -- update side -------------------------------------------------------

    def ingest(self, score: float, state=None) -> None:
        """Fold one revealed (score, state) pair into the archives.

        Validation happens before any mutation, so a rejected call leaves
        the engine untouched.
        """
        if not (score >= 0.0 and math.isfinite(score)):
            raise ValueError(f"scores are nonnegative finite reals, got {score!r}")
        if state is not None:
            state = np.asarray(state, dtype=np.float64)
            if state.shape != (self.cfg.state_dim,):
                raise ValueError(
                    f"dimension mismatch: expected state of shape ({self.cfg.state_dim},), got {state.shape}"
                )
        t = self.count
        if t == len(self._wbuf):
            self._wbuf = np.concatenate([self._wbuf, np.empty(len(self._wbuf))])
        # existing weights age by one step, the newcomer enters at weight 1
        self._wbuf[:t] *= self.cfg.beta
        self._wbuf[t] = 1.0
        self._tsorted.insert(score, t)
        self._raw_scores.append(float(score))

        if self.use_spatial and state is not None:
            if self._warm == self._smat.shape[0]:
                self._smat = np.concatenate([self._smat, np.empty_like(self._smat)])
            self.moments.push(state)
            self._smat[self._warm] = state
            self._ssorted.insert(score, self._warm)
            self._warm_scores.append(float(score))
            self._warm_global.append(t)
            self._warm += 1

        self.max_score = max(self.max_score, float(score))
        self.count += 1
        cap = self.cfg.history_cap
        if cap is not None and self.count > cap:
            self._truncate(cap)

    def _truncate(self, cap: int) -> None:
        """Drop the oldest archived pairs down to ``cap`` entries."""
        drop = self.count - cap
        kept = self._raw_scores[drop:]
        self._raw_scores = kept
        self.count = len(kept)
        arr = np.asarray(kept, dtype=np.float64)
        self._wbuf[: self.count] = np.power(
            self.cfg.beta, (self.count - 1) - np.arange(self.count, dtype=np.float64)
        )
        self._tsorted.rebuild(arr)
        self.max_score = float(arr.max()) if self.count else 0.0

        if self.use_spatial and self._warm:
            # a warm entry survives iff its global arrival index survived
            n_warm_dropped = bisect_right(self._warm_global, drop - 1)
            if n_warm_dropped > 0:
                self._smat[: self._warm - n_warm_dropped] = self._smat[n_warm_dropped : self._warm]
                self._warm_scores = self._warm_scores[n_warm_dropped:]
                self._warm -= n_warm_dropped
                self.moments = OnlineMoments.zeros(self.cfg.state_dim)
                for row in self._smat[: self._warm]:
                    self.moments.push(row)
            self._warm_global = [g - drop for g in self._warm_global[n_warm_dropped:]]
            self._ssorted.rebuild(np.asarray(self._warm_scores, dtype=np.float64))

    # -- introspection for tests and diagnostics ---------------------------

    def scores_arrival(self) -> list[float]:
        return list(self._raw_scores)

    def warm_pairs(self):
        return self._smat[: self._warm].copy(), list(self._warm_scores)


class SabcpPredictor:
    """State-adaptive interval predictor over a (center, scale, y) stream.

    Drive it with ``step(center, scale, y, state)`` or through the
    forecast / update pair when the two phases need to be observed
    separately. ``state`` is the spatial conditioning vector, or None while
    the state construction is still cold; cold steps contribute their score
    to the temporal archive only, which keeps the evidence gate at 0 until
    real states exist.
    """

    method = "sabcp"

    def __init__(self, cfg: SabcpConfig, use_spatial: bool = True):
        self.cfg = validate_config(cfg)
        self.engine = QuantileEngine(cfg, use_spatial=use_spatial)
        self.steps_seen = 0

    def forecast(self, center: float, scale: float = 1.0, state=None) -> IntervalForecast:
        ctx = self.engine.prepare(state)
        q_hat = self.engine.solve(ctx, self.cfg.alpha)
        margin = q_hat * scale if self.cfg.score_mode == "scaled" else q_hat
        return IntervalForecast(
            center=center,
            margin=margin,
            lower=center - margin,
            upper=center + margin,
            pi_s=ctx.pi_s,
            d_s=ctx.d_s,
            lambda_t=ctx.lambda_t,
            q_hat=q_hat,
        )

    def update(self, center: float, scale: float, y: float, state=None) -> float:
        score = nonconformity(center, scale, y, self.cfg.score_mode)
        self.engine.ingest(score, state)
        self.steps_seen += 1
        return score

    def step(self, center: float, scale: float, y: float, state=None) -> IntervalForecast:
        fc = self.forecast(center, scale, state)
        self.update(center, scale, y, state)
        return fc
