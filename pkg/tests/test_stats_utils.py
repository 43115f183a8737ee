"""Tests for confidence intervals, KS distances and trend fits."""

import math

import numpy as np
import pytest
from scipy import stats

from psslab.utils.rng import RandomStream, substream
from psslab.utils.stats_utils import (
    fit_power_law,
    is_decreasing_trend,
    linear_fit,
    mean_ci,
    resampled_ks_exponential,
    weighted_ks_exponential,
)


class TestMeanCi:
    """Student-t intervals."""

    def test_known_half_width(self) -> None:
        interval = mean_ci([1.0, 2.0, 3.0], 0.95)

        assert interval.mean == 2.0
        assert interval.half_width == pytest.approx(4.302652729911275 / math.sqrt(3))
        assert interval.contains(2.0)

    def test_constant_samples(self) -> None:
        interval = mean_ci([5.0, 5.0, 5.0])

        assert interval.half_width == 0.0
        assert interval.low == interval.high == 5.0

    def test_needs_two_samples(self) -> None:
        with pytest.raises(ValueError, match="at least 2"):
            mean_ci([1.0])

    def test_overlap(self) -> None:
        a = mean_ci([1.0, 2.0, 3.0])
        b = mean_ci([3.0, 4.0, 5.0])
        c = mean_ci([100.0, 101.0, 102.0])

        assert a.overlaps(b)
        assert not a.overlaps(c)

    def test_coverage_of_normal_mean(self) -> None:
        rng = np.random.default_rng(5)
        hits = sum(mean_ci(rng.normal(1.0, 2.0, size=10)).contains(1.0) for _ in range(400))

        assert 0.90 <= hits / 400 <= 0.99


class TestWeightedKs:
    """Weighted empirical CDF against an exponential."""

    def test_exact_quantiles(self) -> None:
        n = 50
        values = stats.expon.ppf((np.arange(1, n + 1) - 0.5) / n, scale=2.0)

        distance = weighted_ks_exponential(values, np.ones(n), 2.0)

        assert distance == pytest.approx(0.5 / n, abs=1e-12)

    def test_weights_shift_mass(self) -> None:
        values = np.array([0.1, 10.0])

        light = weighted_ks_exponential(values, np.array([1.0, 1.0]), 1.0)
        heavy = weighted_ks_exponential(values, np.array([1.0, 100.0]), 1.0)

        assert heavy > light

    def test_matches_scipy_for_equal_weights(self) -> None:
        values = np.random.default_rng(1).exponential(1.5, size=300)

        ours = weighted_ks_exponential(values, np.ones(300), 1.5)
        reference = stats.kstest(values, stats.expon(scale=1.5).cdf).statistic

        assert ours == pytest.approx(reference, abs=1e-12)

    def test_empty_is_nan(self) -> None:
        assert math.isnan(weighted_ks_exponential([], [], 1.0))

    def test_resampled_small_for_true_distribution(self) -> None:
        values = np.random.default_rng(2).exponential(1.0, size=2000)

        distance = resampled_ks_exponential(values, np.ones(2000), 1.0, substream(0, 0, 1))

        assert distance < 0.08


class TestFits:
    """Linear and power-law fits, trend checks."""

    def test_linear_fit_exact(self) -> None:
        fit = linear_fit([1.0, 2.0, 4.0], [3.0, 5.0, 9.0])

        assert fit.slope == pytest.approx(2.0)
        assert fit.intercept == pytest.approx(1.0)
        assert fit.r2 == pytest.approx(1.0)

    def test_linear_fit_flat(self) -> None:
        fit = linear_fit([1.0, 2.0, 3.0], [4.0, 4.0, 4.0])

        assert fit.slope == pytest.approx(0.0, abs=1e-12)
        assert fit.r2 == 0.0

    def test_power_law(self) -> None:
        r = np.array([0.1, 0.05, 0.02])

        exponent, constant = fit_power_law(r, 3.0 / r)

        assert exponent == pytest.approx(-1.0)
        assert constant == pytest.approx(3.0)

    def test_power_law_needs_positive_values(self) -> None:
        exponent, _ = fit_power_law([0.1, 0.05], [1.0, 0.0])

        assert math.isnan(exponent)

    @pytest.mark.parametrize(
        ("values", "expected"),
        [
            ([3.0, 2.0, 1.0], True),
            ([3.0, 4.0, 1.0], True),
            ([3.0, 4.0, 5.0], False),
            ([], True),
        ],
    )
    def test_decreasing_trend(self, values: list[float], expected: bool) -> None:
        assert is_decreasing_trend(values) is expected


class TestRandomStream:
    """Block-buffered variates from named substreams."""

    def test_substreams_are_reproducible(self) -> None:
        a = RandomStream.for_replication(9, 3, block=16)
        b = RandomStream.for_replication(9, 3, block=16)

        assert [a.uniform() for _ in range(40)] == [b.uniform() for _ in range(40)]

    def test_replications_are_distinct(self) -> None:
        a = RandomStream.for_replication(9, 0)
        b = RandomStream.for_replication(9, 1)

        assert a.uniform() != b.uniform()

    def test_exponential_mean(self) -> None:
        stream = RandomStream(substream(4, 0), block=128)

        draws = [stream.exponential(2.0) for _ in range(5000)]

        assert np.mean(draws) == pytest.approx(0.5, rel=0.05)

    def test_choice_range(self) -> None:
        stream = RandomStream(substream(4, 1), block=32)

        assert {stream.choice(3) for _ in range(300)} == {0, 1, 2}
