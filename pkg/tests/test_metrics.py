"""Tests for the metrics accumulator and the sample reservoir."""

import numpy as np
import pytest

from psslab.models.metrics import MetricsAccumulator, Reservoir, WorkloadWeights


def _accumulator(scale: float) -> MetricsAccumulator:
    acc = MetricsAccumulator.create(2, 2, 3, capacity=8)
    weights = WorkloadWeights(
        u=np.array([2 / 3, 1 / 3]), v=np.array([2 / 3, 1 / 3]), nonbasic=np.zeros(3, bool)
    )
    acc.integrate(
        scale,
        np.array([1.0, 2.0, 0.0]),
        np.zeros(2),
        np.array([1.0, 4.0]),
        np.array([0.0, 0.0]),
        np.array([1.0, 1.0, 0.0]),
        weights,
        dual_queue=1.5,
        nonbasic_dual_queue=0.0,
    )
    acc.record_departure(0, scale)
    return acc


class TestIntegrate:
    """Time integrals of one holding interval."""

    def test_weighted_quantities(self) -> None:
        acc = _accumulator(2.0)

        assert acc.elapsed == 2.0
        np.testing.assert_allclose(acc.queue_integral, [2.0, 4.0, 0.0])
        assert acc.total_queue_integral == pytest.approx(6.0)
        # u.W = 2/3 + 4/3 = 2
        assert acc.weighted_workload_integral == pytest.approx(4.0)
        assert acc.weighted_workload_sq_integral == pytest.approx(8.0)
        # W_k / u_k = (1.5, 12)
        assert acc.top_integral == pytest.approx(24.0)
        assert acc.gap_integral == pytest.approx(21.0)
        assert acc.dual_queue_integral == pytest.approx(3.0)

    def test_orthogonal_component(self) -> None:
        acc = MetricsAccumulator.create(1, 2, 2, capacity=8)
        weights = WorkloadWeights.uniform(1, 2, 2)

        acc.integrate(
            1.0, np.ones(2), np.zeros(1), np.array([3.0, 1.0]), np.zeros(2), np.ones(2), weights, 0.0, 0.0
        )

        # W - (u.W / u.u) u = (1, -1)
        assert acc.orthogonal_integral == pytest.approx(np.sqrt(2.0))

    def test_idle_weighted(self) -> None:
        acc = MetricsAccumulator.create(1, 2, 2, capacity=8)
        weights = WorkloadWeights.uniform(1, 2, 2)

        acc.integrate(0.5, np.array([2.0, 0.0]), np.zeros(1), np.array([2.0, 0.0]), np.array([0.0, 1.0]),
                      np.array([1.0, 0.0]), weights, 0.0, 0.0)

        np.testing.assert_allclose(acc.idle_weighted_integral, [0.0, 1.0])
        np.testing.assert_allclose(acc.idle_integral, [0.0, 0.5])

    def test_reservoir_records_holding_time(self) -> None:
        acc = _accumulator(2.0)

        assert acc.reservoir.values == [pytest.approx(2.0)]
        assert acc.reservoir.weights == [2.0]


class TestMerge:
    """Field-wise merge of accumulators."""

    def test_merge_is_associative(self) -> None:
        a, b, c = _accumulator(1.0), _accumulator(2.0), _accumulator(3.0)

        left = a.merge(b).merge(c)
        right = a.merge(b.merge(c))

        assert left.elapsed == right.elapsed == 6.0
        assert left.runs == right.runs == 3
        np.testing.assert_allclose(left.queue_integral, right.queue_integral)
        assert left.sojourn_sum == right.sojourn_sum == 6.0
        assert left.reservoir.values == right.reservoir.values
        assert left.reservoir.weights == right.reservoir.weights

    def test_merge_keeps_inputs(self) -> None:
        a, b = _accumulator(1.0), _accumulator(2.0)

        a.merge(b)

        assert a.elapsed == 1.0
        assert a.runs == 1

    def test_topology_mismatch(self) -> None:
        with pytest.raises(ValueError, match="different topologies"):
            _accumulator(1.0).merge(MetricsAccumulator.create(1, 1, 1, capacity=4))


class TestReservoir:
    """Bounded thinning of the sample sequence."""

    def test_capacity_respected(self) -> None:
        reservoir = Reservoir(capacity=4)

        for n in range(100):
            reservoir.add(float(n), 1.0)

        assert len(reservoir) <= 4
        assert reservoir.stride in (32, 64)
        assert reservoir.seen == 100

    def test_kept_values_are_evenly_spaced(self) -> None:
        reservoir = Reservoir(capacity=4)

        for n in range(16):
            reservoir.add(float(n), 1.0)

        steps = np.diff(reservoir.values)
        assert np.all(steps == steps[0])

    def test_under_capacity_keeps_everything(self) -> None:
        reservoir = Reservoir(capacity=10)

        for n in range(5):
            reservoir.add(float(n), 0.5)

        assert reservoir.values == [0.0, 1.0, 2.0, 3.0, 4.0]
        assert reservoir.stride == 1
