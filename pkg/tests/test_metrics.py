"""Coverage, width, the Winkler score, and aggregation."""

import numpy as np
import pytest

from sabcp import IntervalForecast, aggregate, high_vol_mask, winkler
from sabcp.metrics import make_record

Z90 = 1.2815515655446004  # standard normal 0.9 quantile


class TestWinkler:
    def test_covered_pays_width(self):
        assert winkler(0.0, 2.0, 1.0, 0.1) == 2.0

    def test_miss_above(self):
        assert winkler(0.0, 2.0, 3.0, 0.1) == pytest.approx(22.0, rel=1e-12)

    def test_miss_below(self):
        assert winkler(-1.0, 1.0, -2.0, 0.5) == pytest.approx(6.0, rel=1e-12)

    def test_boundary_counts_as_covered(self):
        assert winkler(0.0, 2.0, 2.0, 0.1) == 2.0
        assert winkler(0.0, 2.0, 0.0, 0.1) == 2.0

    def test_inverted_interval_rejected(self):
        with pytest.raises(ValueError, match="inverted"):
            winkler(1.0, 0.0, 0.5, 0.1)

    def test_bad_alpha_rejected(self):
        with pytest.raises(ValueError):
            winkler(0.0, 1.0, 0.5, 0.0)

    def test_propriety_smoke(self):
        # centered on the true median, the (1 - alpha)-quantile width wins
        rng = np.random.default_rng(100)
        ys = rng.normal(size=100_000)
        alpha = 0.2
        z = 1.2815515655446004  # N(0,1) quantile at 1 - alpha/2 = 0.9
        means = {}
        for factor in (0.8, 1.0, 1.2):
            m = factor * z
            scores = (m + m) + (2.0 / alpha) * (
                np.maximum(-m - ys, 0.0) + np.maximum(ys - m, 0.0)
            )
            means[factor] = float(scores.mean())
        assert means[1.0] < means[0.8]
        assert means[1.0] < means[1.2]


class TestHighVolMask:
    def test_ten_point_ramp_marks_the_top(self):
        mask = high_vol_mask(list(range(1, 11)))
        assert mask.sum() == 1
        assert mask[-1]

    def test_constant_magnitudes_all_tie(self):
        mask = high_vol_mask([2.0] * 7)
        assert mask.all()

    def test_sign_flip_invariance(self):
        rng = np.random.default_rng(1)
        ys = rng.normal(size=200)
        assert (high_vol_mask(ys) == high_vol_mask(-ys)).all()

    def test_marks_at_least_the_decile_count(self):
        rng = np.random.default_rng(2)
        ys = rng.normal(size=1000)
        assert high_vol_mask(ys).sum() >= 100

    def test_expanding_mode(self):
        mask = high_vol_mask([1.0, 2.0, 3.0, 0.5], mode="expanding")
        # each prefix of length < 10 marks only its running max (and ties)
        assert mask.tolist() == [True, True, True, False]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            high_vol_mask([])


def fc(lower, upper):
    c = (lower + upper) / 2.0
    return IntervalForecast(
        center=c, margin=upper - c, lower=lower, upper=upper,
        pi_s=0.0, d_s=0.0, lambda_t=1.0, q_hat=upper - c,
    )


class TestAggregate:
    def test_all_covered(self):
        records = [make_record(t, 0.0, fc(-1.0, 1.0), 0.1) for t in range(5)]
        report = aggregate(records, np.zeros(5, dtype=bool))
        assert report.marginal_coverage == 1.0
        assert report.high_vol_coverage is None
        assert report.n_high_vol == 0

    def test_constant_widths(self):
        records = [make_record(t, 0.0, fc(-0.5, 2.5), 0.1) for t in range(8)]
        report = aggregate(records, np.ones(8, dtype=bool))
        assert report.avg_width == pytest.approx(3.0, rel=1e-12)
        assert report.high_vol_coverage == 1.0

    def test_hand_built_four_records(self):
        ys = [0.0, 5.0, -0.2, 1.5]
        records = [make_record(t, y, fc(-1.0, 2.0), 0.1) for t, y in enumerate(ys)]
        mask = np.array([True, True, False, False])
        report = aggregate(records, mask)
        # y = 5 misses: coverage 3/4; winkler = 3 + 20 * 3 for the miss
        assert report.marginal_coverage == pytest.approx(0.75)
        assert report.avg_width == pytest.approx(3.0)
        assert report.avg_winkler == pytest.approx((3.0 * 3 + 63.0) / 4.0, rel=1e-12)
        assert report.high_vol_coverage == pytest.approx(0.5)
        assert report.n_steps == 4 and report.n_high_vol == 2

    def test_covered_records_pay_exactly_width(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            y = float(rng.normal())
            lo, hi = y - abs(rng.normal()) - 0.1, y + abs(rng.normal()) + 0.1
            assert winkler(lo, hi, y, 0.2) == hi - lo

    def test_mean_winkler_dominates_mean_width(self):
        rng = np.random.default_rng(8)
        records = []
        for t in range(300):
            y = float(rng.normal() * 2.0)
            records.append(make_record(t, y, fc(-1.2, 1.2), 0.1))
        report = aggregate(records)
        assert report.avg_winkler >= report.avg_width

    def test_default_mask_is_full_sample_decile(self):
        rng = np.random.default_rng(9)
        ys = rng.normal(size=50)
        records = [make_record(t, float(y), fc(-9.0, 9.0), 0.1) for t, y in enumerate(ys)]
        auto = aggregate(records)
        manual = aggregate(records, high_vol_mask(ys))
        assert auto == manual

    def test_empty_records_rejected(self):
        with pytest.raises(ValueError):
            aggregate([])
