"""Variance-targeted GARCH(1,1) recursion."""

import math

import numpy as np
import pytest

from sabcp import GarchModel, GarchState, garch_init, garch_step


class TestInit:
    def test_variance_targeting_identity(self):
        rng = np.random.default_rng(0)
        warmup = rng.normal(0.0, 2.0, size=250)
        state = garch_init(warmup, a=0.05, b=0.90)
        var = float(np.var(warmup, ddof=1))
        assert state.omega == pytest.approx(var * 0.05, rel=1e-12)
        assert state.sigma2 == var

    def test_targeting_with_unit_coefficgap(self):
        # warmup variance v, a + b = 0.95  ->  omega = 0.05 v
        warmup = np.tile([2.0, -2.0], 20)
        state = garch_init(warmup, a=0.05, b=0.90)
        v = float(np.var(warmup, ddof=1))
        assert state.omega == pytest.approx(0.05 * v, rel=1e-12)

    def test_stationarity_boundary_rejected(self):
        warmup = np.random.default_rng(1).normal(size=100)
        with pytest.raises(ValueError, match="stationarity"):
            garch_init(warmup, a=0.5, b=0.5)

    def test_constant_warmup_rejected(self):
        with pytest.raises(ValueError, match="variance"):
            garch_init(np.full(100, 1.3))

    def test_short_warmup_rejected(self):
        with pytest.raises(ValueError, match="warmup"):
            garch_init(np.arange(10.0))

    def test_negative_coefficients_rejected(self):
        warmup = np.random.default_rng(2).normal(size=100)
        with pytest.raises(ValueError):
            garch_init(warmup, a=-0.1, b=0.5)


class TestStep:
    def test_stationary_fixed_point(self):
        state = GarchState(omega=0.2, a=0.05, b=0.90, sigma2=4.0)
        center, scale, nxt = garch_step(state, 2.0)
        assert center == 0.0
        assert scale == 2.0
        assert nxt.sigma2 == pytest.approx(0.2 + 0.05 * 4.0 + 0.9 * 4.0, rel=1e-15)
        assert nxt.sigma2 == pytest.approx(4.0, rel=1e-15)

    def test_emitted_scale_is_pre_update(self):
        state = GarchState(omega=0.2, a=0.05, b=0.90, sigma2=4.0)
        _, scale, nxt = garch_step(state, 50.0)
        assert scale == 2.0  # the huge shock shows up only in the next state
        assert nxt.sigma2 > 4.0

    def test_zero_shock_decays_to_omega_over_one_minus_b(self):
        state = GarchState(omega=0.2, a=0.05, b=0.90, sigma2=4.0)
        target = 0.2 / (1.0 - 0.9)
        prev = state.sigma2
        for _ in range(300):
            _, _, state = garch_step(state, 0.0)
            assert state.sigma2 <= prev  # monotone from above
            prev = state.sigma2
        assert state.sigma2 == pytest.approx(target, rel=1e-9)

    def test_rejects_non_finite_return(self):
        state = GarchState(omega=0.2, a=0.05, b=0.90, sigma2=4.0)
        with pytest.raises(ValueError):
            garch_step(state, float("nan"))

    def test_positivity_under_extreme_stream(self):
        state = GarchState(omega=1e-10, a=0.05, b=0.90, sigma2=1e-10)
        rng = np.random.default_rng(3)
        for _ in range(500):
            r = float(rng.choice([0.0, 0.0, 100.0, -100.0]))
            _, scale, state = garch_step(state, r)
            assert state.sigma2 > 0.0
            assert scale > 0.0


class TestStationaryMean:
    def test_running_variance_tracks_targeted_level(self):
        rng = np.random.default_rng(12)
        v_bar = 4.0
        warmup = rng.normal(0.0, math.sqrt(v_bar), size=500)
        model, _ = GarchModel.from_warmup(warmup)
        sig2 = []
        for _ in range(5000):
            _, scale = model.forecast()
            sig2.append(scale**2)
            model.update(float(rng.normal(0.0, math.sqrt(v_bar))))
        running_mean = float(np.mean(sig2))
        target = float(np.var(warmup, ddof=1))
        assert abs(running_mean - target) / target <= 0.10


class TestModelWrapper:
    def test_replay_carries_recent_shocks(self):
        rng = np.random.default_rng(9)
        calm = rng.normal(0.0, 1.0, size=200)
        stormy_tail = np.concatenate([calm, rng.normal(0.0, 6.0, size=50)])
        replayed, scales = GarchModel.from_warmup(stormy_tail, replay=True)
        frozen, none = GarchModel.from_warmup(stormy_tail, replay=False)
        assert len(scales) == 250 and none == []
        # the replayed recursion saw the stormy tail; the frozen one did not
        assert replayed.forecast()[1] > frozen.forecast()[1]

    def test_forecast_is_pure(self):
        model, _ = GarchModel.from_warmup(np.random.default_rng(4).normal(size=100))
        assert model.forecast() == model.forecast()
