"""Tests for replications, sweeps, derived checks and the stability probe."""

import json
from types import SimpleNamespace

import numpy as np
import pytest

from psslab.models.allocation import DualSolution
from psslab.models.errors import ExperimentError
from psslab.schemas.experiment import ExperimentSpec
from psslab.schemas.policy import PolicySpec
from psslab.schemas.report import StabilityVerdict
from psslab.services.allocation_service import AllocationService
from psslab.services.lab_service import LabService, estimate, resolve_jobs
from psslab.services.policy_service import PolicyService
from psslab.services.simulation_service import SimulationService
from psslab.services.topology_service import TopologyService
from tests.utils import EXPERIMENT_DIR, make_point, make_verification_report, mm1, n_model, w_model

WWTA_HLPPS = PolicySpec.model_validate(
    {"label": "wwta-hlpps", "routing": "wwta", "scheduling": {"type": "hlpps"}}
)


def _experiment(**overrides) -> ExperimentSpec:
    data = {
        "name": "unit",
        "policies": [WWTA_HLPPS.model_dump(mode="json")],
        "r_values": [0.5],
        "horizon": 200.0,
        "warmup_fraction": 0.1,
        "replications": 3,
    }
    data.update(overrides)
    return ExperimentSpec.model_validate(data)


class TestExperimentParsing:
    """Experiment files."""

    def test_bundled_experiments_parse(self) -> None:
        for path in sorted(EXPERIMENT_DIR.glob("*.json")):
            spec = LabService.load_experiment(path)
            assert spec.name == path.stem

    def test_malformed_json(self) -> None:
        with pytest.raises(ExperimentError, match=r"exp.json:1:"):
            LabService.parse_experiment("{", source="exp.json")

    @pytest.mark.parametrize(
        "override",
        [
            {"replications": 1},
            {"r_values": [0.0]},
            {"loads": [1.2]},
            {"policies": []},
            {"doublings": 1},
        ],
    )
    def test_invalid_fields(self, override: dict) -> None:
        data = _experiment().model_dump(mode="json")
        data.update(override)

        with pytest.raises(ExperimentError, match="invalid experiment"):
            LabService.parse_experiment(json.dumps(data))

    def test_points_from_loads(self) -> None:
        spec = _experiment(r_values=None, loads=[0.9, 0.95])

        assert spec.heavy_traffic_points([0.1]) == pytest.approx([0.1, 0.05])

    def test_points_default(self) -> None:
        assert _experiment(r_values=None).heavy_traffic_points([0.2]) == [0.2]


class TestHorizon:
    """Horizon and warmup per sweep point."""

    def test_fixed(self) -> None:
        assert LabService.horizon_for(_experiment(), 0.1) == pytest.approx((200.0, 20.0))

    def test_inverse_r(self) -> None:
        spec = _experiment(horizon_scaling="inverse_r")

        assert LabService.horizon_for(spec, 0.1) == pytest.approx((2000.0, 200.0))

    def test_default_scales_base_horizon_with_r(self) -> None:
        spec = ExperimentSpec.model_validate(
            {"name": "plain", "policies": [WWTA_HLPPS.model_dump(mode="json")]}
        )

        points = [LabService.horizon_for(spec, r) for r in (0.1, 0.05, 0.02)]

        assert [horizon for horizon, _ in points] == pytest.approx([5e5, 1e6, 2.5e6])
        assert [warmup for _, warmup in points] == pytest.approx([1e5, 2e5, 5e5])

    def test_explicit_fixed_without_horizon(self) -> None:
        spec = _experiment(horizon=None, horizon_scaling="fixed")

        assert LabService.horizon_for(spec, 0.05) == pytest.approx((50000.0, 5000.0))

    def test_jobs(self) -> None:
        assert resolve_jobs(3) == 3
        assert resolve_jobs(0) >= 1


class TestReplicate:
    """Independent replications and their pooled report."""

    def test_pooled_and_per_replication(self) -> None:
        config = TopologyService.scale_arrivals(n_model(), 0.5)

        result = LabService.replicate(config, WWTA_HLPPS, horizon=200.0, warmup=20.0, seed=3, replications=3)

        assert len(result.reports) == 3
        assert [r.replication for r in result.reports] == [0, 1, 2]
        assert result.pooled.runs == 3
        assert result.pooled.elapsed == pytest.approx(540.0)
        pooled_mean = np.mean([r.mean_total_queue for r in result.reports])
        assert result.pooled.mean_total_queue == pytest.approx(pooled_mean)

    def test_parallel_matches_serial(self) -> None:
        config = TopologyService.scale_arrivals(n_model(), 0.5)
        kwargs = dict(horizon=100.0, warmup=0.0, seed=8, replications=2)

        serial = LabService.replicate(config, WWTA_HLPPS, jobs=1, **kwargs)
        parallel = LabService.replicate(config, WWTA_HLPPS, jobs=2, **kwargs)

        assert [r.model_dump() for r in serial.reports] == [r.model_dump() for r in parallel.reports]

    def test_needs_two_replications(self) -> None:
        with pytest.raises(ExperimentError):
            LabService.replicate(mm1(), WWTA_HLPPS, horizon=10.0, warmup=0.0, seed=0, replications=1)

    def test_summary_keys(self) -> None:
        result = LabService.replicate(mm1(), WWTA_HLPPS, horizon=100.0, warmup=0.0, seed=0, replications=2)

        assert set(result.summary()) == {
            "mean_total_queue",
            "mean_weighted_workload",
            "mean_gap",
            "mean_top",
            "sojourn_mean",
        }

    def test_estimate(self) -> None:
        est = estimate([1.0, 2.0, 3.0], 0.95)

        assert est.mean == 2.0
        assert est.n == 3
        assert est.ci_half_width == pytest.approx(2.484, abs=1e-3)


class TestBarResiduals:
    """Idle and flow identities at the heavy-traffic allocation."""

    def test_zero_at_fluid_allocation(self) -> None:
        config = n_model()
        r = 0.1
        scaled = TopologyService.scale_arrivals(config, r)
        dual = DualSolution(v=np.array([2 / 3, 1 / 3]), u=np.array([2 / 3, 1 / 3]), d=np.zeros(3))
        x = np.array([1.0, 0.6, 0.4])
        metrics = SimpleNamespace(
            idle_fraction=[r, r],
            effort_fraction=(x * (1 - r)).tolist(),
            routing_fraction=[1.0 / 1.3, 0.3 / 1.3, 1.0],
            arrival_rates=list(scaled.arrival_rates),
        )

        residuals = LabService.bar_residuals(metrics, dual, r, scaled)

        assert residuals.idle == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(residuals.flow, 0.0, atol=1e-12)

    def test_nonbasic_effort_enters_idle_identity(self) -> None:
        config = w_model()
        dual = AllocationService.analyze(config).dual
        metrics = SimpleNamespace(
            idle_fraction=[0.0, 0.0],
            effort_fraction=[0.0, 0.0, 0.0, 0.0, 0.1, 0.0],
            routing_fraction=[1.0, 1.0, 0.0, 1.0, 0.0, 0.0],
            arrival_rates=list(config.arrival_rates),
        )

        residuals = LabService.bar_residuals(metrics, dual, 0.0, config)

        assert residuals.idle == pytest.approx(0.075)

    def test_identities_hold_on_simulated_run(self) -> None:
        config = n_model()
        dual = AllocationService.analyze(config).dual
        scaled = TopologyService.scale_arrivals(config, 0.5)
        metrics = SimulationService.run(scaled, WWTA_HLPPS, 40000.0, 4000.0, seed=5, dual=dual)

        residuals = LabService.bar_residuals(metrics, dual, 0.5, scaled)

        assert abs(residuals.idle) < 0.02
        assert max(abs(f) for f in residuals.flow) < 0.05

    @pytest.mark.slow
    def test_residuals_shrink_with_horizon(self) -> None:
        config = n_model()
        dual = AllocationService.analyze(config).dual
        scaled = TopologyService.scale_arrivals(config, 0.5)
        idle_rms = []
        flow_rms = []
        for horizon in (200.0, 2000.0, 20000.0):
            result = LabService.replicate(
                scaled, WWTA_HLPPS, horizon=horizon, warmup=0.1 * horizon, seed=1, replications=10, dual=dual,
                jobs=0,
            )
            residuals = [LabService.bar_residuals(m, dual, 0.5, scaled) for m in result.reports]
            idle_rms.append(float(np.sqrt(np.mean([res.idle**2 for res in residuals]))))
            flow_rms.append(float(np.sqrt(np.mean([max(f * f for f in res.flow) for res in residuals]))))

        assert idle_rms[0] > idle_rms[1] > idle_rms[2]
        assert flow_rms[0] > flow_rms[1] > flow_rms[2]


class TestDerivedChecks:
    """Checks computed from finished sweeps."""

    def test_ssc_passes_for_bounded_gap(self) -> None:
        report = make_verification_report(
            "wwta",
            [
                make_point(0.1, gap=1.0, top=10.0),
                make_point(0.05, gap=1.1, top=20.0),
                make_point(0.02, gap=1.0, top=50.0),
            ],
        )

        ssc = LabService.ssc_report(report)

        assert ssc.gap_bounded and ssc.top_grows and ssc.ratio_shrinks
        assert ssc.passed
        assert [row.r for row in ssc.rows] == [0.1, 0.05, 0.02]
        assert ssc.rows[0].ratio == pytest.approx(0.1)

    def test_ssc_fails_for_growing_gap(self) -> None:
        report = make_verification_report(
            "jsq",
            [
                make_point(0.1, gap=5.0, top=10.0),
                make_point(0.05, gap=10.0, top=20.0),
                make_point(0.02, gap=25.0, top=50.0),
            ],
        )

        ssc = LabService.ssc_report(report)

        assert not ssc.gap_bounded
        assert not ssc.ratio_shrinks
        assert not ssc.passed

    def test_zero_gap_is_bounded(self) -> None:
        report = make_verification_report("sym", [make_point(0.1, gap=0.0), make_point(0.05, gap=0.0)])

        assert LabService.ssc_report(report).gap_bounded

    def test_moment_exponents(self) -> None:
        points = [
            make_point(r, dual_queue=0.3, nonbasic_dual_queue=r, effort={"(3,1)": r * r})
            for r in (0.1, 0.05, 0.02)
        ]

        trends = LabService.moment_trends(make_verification_report("wwta", points))

        assert trends.exponents["nonbasic_dual_queue"] == pytest.approx(1.0)
        assert trends.exponents["effort (3,1)"] == pytest.approx(2.0)
        assert trends.exponents["dual_queue"] == pytest.approx(0.0, abs=1e-12)
        assert trends.exponents["idle_weighted_workload server 1"] == pytest.approx(1.0)

    def test_scheduling_invariance_overlap(self) -> None:
        reports = [
            make_verification_report(
                "hlpps", [make_point(0.1, weighted=0.26), make_point(0.05, weighted=0.27)]
            ),
            make_verification_report(
                "sbp", [make_point(0.05, weighted=0.28), make_point(0.02, weighted=0.3)]
            ),
        ]

        invariance = LabService.scheduling_invariance(reports)

        assert invariance.r == 0.05
        assert invariance.overlap
        assert set(invariance.estimates) == {"hlpps", "sbp"}

    def test_scheduling_invariance_disjoint(self) -> None:
        reports = [
            make_verification_report("a", [make_point(0.05, weighted=0.2)]),
            make_verification_report("b", [make_point(0.05, weighted=0.4)]),
        ]

        assert not LabService.scheduling_invariance(reports).overlap

    def test_no_shared_r(self) -> None:
        reports = [
            make_verification_report("a", [make_point(0.1)]),
            make_verification_report("b", [make_point(0.05)]),
        ]

        with pytest.raises(ExperimentError, match="share no r"):
            LabService.scheduling_invariance(reports)


class TestSweep:
    """Short sweeps end to end."""

    def test_w_model_sweep_structure(self) -> None:
        config = w_model()
        spec = _experiment(policies=[WWTA_HLPPS.model_dump(mode="json")], r_values=[0.5, 0.3])
        analysis = AllocationService.analyze(config)

        reports = LabService.sweep_heavy_traffic(config, spec, analysis, seed=1)

        assert len(reports) == 1
        report = reports[0]
        assert [p.r for p in report.points] == [0.5, 0.3]
        assert report.prediction.m == pytest.approx(0.264)
        point = report.points[0]
        assert len(point.per_server_workload) == 2
        assert len(point.flow_residuals) == 6
        assert set(point.nonbasic_effort) == {"(3,1)", "(1,2)"}
        assert 0.0 <= point.ks_distance <= 1.0
        assert set(report.trends) == {"weighted_workload_converges", "per_server_converges", "ks_decreases"}

    def test_sweep_requires_prediction(self) -> None:
        config = mm1()
        analysis = AllocationService.analyze(config)

        with pytest.raises(ExperimentError, match="no heavy-traffic prediction"):
            LabService.sweep_heavy_traffic(config, _experiment(), analysis, seed=0)

    def test_compare_rows(self) -> None:
        spec = _experiment(
            policies=[
                WWTA_HLPPS.model_dump(mode="json"),
                {"label": "mw", "scheduling": {"type": "maxweight"}},
            ],
            r_values=None,
            loads=[0.5],
        )

        rows = LabService.compare_policies(n_model(), spec, seed=2)

        assert [(row.policy, row.metric) for row in rows] == [
            ("wwta-hlpps", "completion_time"),
            ("wwta-hlpps", "total_queue"),
            ("mw", "completion_time"),
            ("mw", "total_queue"),
        ]
        assert all(row.load == 0.5 for row in rows)
        assert all(row.mean > 0 for row in rows)

    def test_tie_break_variants(self) -> None:
        config = n_model()
        spec = _experiment(r_values=[0.5], replications=2)

        check = LabService.tie_break_check(config, spec, AllocationService.analyze(config), seed=0)

        assert set(check.estimates) == {"random", "smallest_index"}
        assert check.r == 0.5


class TestStabilityProbe:
    """Doubling-horizon divergence test."""

    def test_stable_queue(self) -> None:
        report = LabService.stability_probe(mm1(1.0), WWTA_HLPPS, 0.5, seed=0, horizon=500.0, doublings=3)

        assert report.verdict is StabilityVerdict.STABLE
        assert report.horizons == [500.0, 1000.0, 2000.0]
        assert len(report.end_queues) == 3

    def test_overloaded_queue_diverges(self) -> None:
        # Nominal arrival rate 2 against service rate 1: still overloaded at load 0.9
        report = LabService.stability_probe(mm1(2.0), WWTA_HLPPS, 0.9, seed=0, horizon=200.0, doublings=3)

        assert report.verdict is StabilityVerdict.DIVERGENT
        assert report.slope == pytest.approx(0.8, rel=0.25)
        assert report.r2 > 0.9

    def test_shorter_horizon_is_prefix_of_longer_path(self) -> None:
        config = TopologyService.scale_to_load(mm1(1.0), 0.5)
        short = SimulationService.run(config, WWTA_HLPPS, 500.0, 0.0, seed=0)
        state = SimulationService.start(config, PolicyService.resolve(WWTA_HLPPS, config), seed=0)

        while SimulationService.step(state, 0.0, 1000.0) and state.clock < 500.0:
            pass

        # The last event fired past 500; every earlier one belongs to the short run
        assert state.events - 1 == short.events
