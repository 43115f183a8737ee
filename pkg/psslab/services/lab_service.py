"""Experiment orchestration and statistical verification of heavy-traffic predictions."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
import json
import logging
import os
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from pydantic import ValidationError

from common.versioning import get_report_schema_version
from psslab.config import get_settings
from psslab.models.allocation import AnalysisResult, DualSolution, LimitPrediction
from psslab.models.errors import ExperimentError
from psslab.models.metrics import MetricsAccumulator, WorkloadWeights
from psslab.models.policy import Policy
from psslab.models.system import Architecture, SystemConfig
from psslab.schemas.experiment import ExperimentSpec
from psslab.schemas.metrics import MetricsReport
from psslab.schemas.policy import PolicySpec
from psslab.schemas.report import (
    BarResiduals,
    ComparisonRow,
    InvarianceReport,
    MetricEstimate,
    MomentTrendReport,
    MomentTrendRow,
    SscReport,
    SscRow,
    StabilityReport,
    StabilityVerdict,
    VerificationPoint,
    VerificationReport,
)
from psslab.services.allocation_service import AllocationService
from psslab.services.policy_service import PolicyService
from psslab.services.simulation_service import SimulationService
from psslab.services.topology_service import TopologyService
from psslab.utils.rng import substream
from psslab.utils.stats_utils import (
    fit_power_law,
    is_decreasing_trend,
    linear_fit,
    mean_ci,
    resampled_ks_exponential,
    weighted_ks_exponential,
)

logger = logging.getLogger("psslab.lab")

# Replication streams use one-element spawn keys; lab resampling uses two-element keys.
_RESAMPLE_TAG = 1


@dataclass(frozen=True)
class _RunTask:
    config: SystemConfig
    policy: Policy
    horizon: float
    warmup: float
    seed: int
    replication: int
    weights: WorkloadWeights


def _run_task(task: _RunTask) -> MetricsAccumulator:
    return SimulationService.simulate(
        task.config, task.policy, task.horizon, task.warmup, task.seed, task.replication, task.weights
    )


def resolve_jobs(jobs: int) -> int:
    """0 means one worker per available core."""
    return jobs if jobs > 0 else (os.cpu_count() or 1)


def estimate(samples: Sequence[float], confidence: float | None = None) -> MetricEstimate:
    """Student-t estimate over replication values."""
    level = get_settings().confidence if confidence is None else confidence
    interval = mean_ci(samples, level)
    return MetricEstimate(mean=interval.mean, ci_half_width=interval.half_width, n=interval.n)


@dataclass(frozen=True)
class ReplicationResult:
    """Per-replication reports plus the pooled report of all merged accumulators."""

    reports: list[MetricsReport]
    pooled: MetricsReport

    def estimate(self, metric: Callable[[MetricsReport], float]) -> MetricEstimate:
        return estimate([metric(report) for report in self.reports])

    def estimates(self, metric: Callable[[MetricsReport], Sequence[float]]) -> list[MetricEstimate]:
        values = np.array([list(metric(report)) for report in self.reports], dtype=np.float64)
        return [estimate(values[:, index]) for index in range(values.shape[1])]

    def summary(self) -> dict[str, MetricEstimate]:
        """Estimates of the scalar statistics every run reports."""
        return {
            "mean_total_queue": self.estimate(lambda m: m.mean_total_queue),
            "mean_weighted_workload": self.estimate(lambda m: m.mean_weighted_workload),
            "mean_gap": self.estimate(lambda m: m.mean_gap),
            "mean_top": self.estimate(lambda m: m.mean_top),
            "sojourn_mean": self.estimate(lambda m: m.sojourn_mean),
        }


class LabService:
    """Replications, sweeps and the checks built on them."""

    @staticmethod
    def parse_experiment(text: str, source: str = "<string>") -> ExperimentSpec:
        """Parse an experiment file.

        Raises:
            ExperimentError: malformed JSON (with line/column) or schema errors.
        """
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ExperimentError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        try:
            return ExperimentSpec.model_validate(raw)
        except ValidationError as exc:
            details = "; ".join(
                f"{'.'.join(str(part) for part in err['loc'])}: {err['msg']}" for err in exc.errors()
            )
            raise ExperimentError(f"{source}: invalid experiment: {details}") from exc

    @staticmethod
    def load_experiment(path: Path) -> ExperimentSpec:
        if not path.exists():
            raise ExperimentError(f"Experiment file '{path}' does not exist")
        return LabService.parse_experiment(path.read_text(encoding="utf-8"), source=str(path))

    @staticmethod
    def config_for(config: SystemConfig, spec: PolicySpec) -> SystemConfig:
        """Topology in the architecture the policy runs in."""
        return config.with_architecture(Architecture.DELAYED if spec.is_delayed else Architecture.IMMEDIATE)

    @staticmethod
    def replicate(
        config: SystemConfig,
        policy: Policy | PolicySpec,
        *,
        horizon: float,
        warmup: float,
        seed: int,
        replications: int,
        dual: DualSolution | None = None,
        jobs: int = 1,
    ) -> ReplicationResult:
        """Run independent replications on disjoint substreams of `seed`.

        Results do not depend on `jobs`: replication n always uses substream n and
        results are merged in replication order.
        """
        if replications < 2:
            raise ExperimentError(f"replications must be at least 2, got {replications}")
        if isinstance(policy, PolicySpec):
            policy = PolicyService.resolve(policy, config)
        weights = SimulationService.weights_from_dual(config, dual)
        tasks = [
            _RunTask(config, policy, horizon, warmup, seed, n, weights) for n in range(replications)
        ]
        workers = min(resolve_jobs(jobs), replications)
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                accumulators = list(pool.map(_run_task, tasks))
        else:
            accumulators = [_run_task(task) for task in tasks]

        def summarize(acc: MetricsAccumulator, replication: int) -> MetricsReport:
            return SimulationService.summarize(
                acc,
                config,
                policy.name,
                seed=seed,
                horizon=horizon,
                warmup=warmup,
                weights=weights,
                replication=replication,
            )

        pooled = accumulators[0]
        for acc in accumulators[1:]:
            pooled = pooled.merge(acc)
        return ReplicationResult(
            reports=[summarize(acc, n) for n, acc in enumerate(accumulators)],
            pooled=summarize(pooled, 0),
        )

    @staticmethod
    def horizon_for(spec: ExperimentSpec, r: float) -> tuple[float, float]:
        """(horizon, warmup) of a sweep point."""
        settings = get_settings()
        base = spec.horizon if spec.horizon is not None else settings.base_horizon
        horizon = base / r if spec.scales_with_r() else base
        fraction = spec.warmup_fraction if spec.warmup_fraction is not None else settings.warmup_fraction
        return horizon, fraction * horizon

    @staticmethod
    def replications_for(spec: ExperimentSpec) -> int:
        return spec.replications if spec.replications is not None else get_settings().replications

    @staticmethod
    def bar_residuals(
        metrics: MetricsReport, dual: DualSolution, r: float, config: SystemConfig
    ) -> BarResiduals:
        """Signed residuals of the steady-state idle and flow-balance identities.

        idle = sum_k u_k idleFrac_k + sum_j d_j effortFrac_j - r
        flow_j = lambda_i^(r) routeFrac_j - mu_j effortFrac_j, with lambda^(r) the run's rates
        """
        idle = np.asarray(metrics.idle_fraction)
        effort = np.asarray(metrics.effort_fraction)
        route = np.asarray(metrics.routing_fraction)
        idle_residual = float(dual.u @ idle + dual.d @ effort - r)
        rates = np.asarray(metrics.arrival_rates)
        classes = np.array([a.class_id for a in config.activities], dtype=np.int64)
        flow = rates[classes] * route - config.rates * effort
        return BarResiduals(idle=idle_residual, flow=flow.tolist())

    @staticmethod
    def _verification_point(
        result: ReplicationResult,
        config: SystemConfig,
        dual: DualSolution,
        prediction: LimitPrediction,
        r: float,
        horizon: float,
        warmup: float,
        seed: int,
        point_index: int,
    ) -> VerificationPoint:
        labels = config.labels
        nonbasic = [j for j in range(config.num_activities) if dual.d[j] > get_settings().classify_tolerance]
        residuals = [LabService.bar_residuals(m, dual, r, config) for m in result.reports]

        samples = result.pooled.weighted_samples
        values = np.array([value for value, _ in samples]) * r
        holding = np.array([weight for _, weight in samples])
        ks = weighted_ks_exponential(values, holding, prediction.m)
        ks_resampled = resampled_ks_exponential(
            values, holding, prediction.m, substream(seed, point_index, _RESAMPLE_TAG)
        )
        return VerificationPoint(
            r=r,
            horizon=horizon,
            warmup=warmup,
            replications=len(result.reports),
            weighted_workload=result.estimate(lambda m: r * m.mean_weighted_workload),
            per_server_workload=result.estimates(lambda m: [r * w for w in m.mean_workload]),
            ks_distance=ks,
            ks_distance_resampled=ks_resampled,
            idle_residual=estimate([res.idle for res in residuals]),
            flow_residuals=[
                estimate([res.flow[j] for res in residuals]) for j in range(config.num_activities)
            ],
            gap=result.estimate(lambda m: m.mean_gap),
            gap_sq=result.estimate(lambda m: m.mean_gap_sq),
            top=result.estimate(lambda m: m.mean_top),
            orthogonal=result.estimate(lambda m: m.mean_orthogonal),
            dual_queue=result.estimate(lambda m: r * m.mean_dual_queue),
            nonbasic_dual_queue=result.estimate(lambda m: r * m.mean_nonbasic_dual_queue),
            idle_weighted_workload=result.estimates(lambda m: [r * w for w in m.idle_weighted_workload]),
            nonbasic_effort={
                labels[j]: result.estimate(lambda m, j=j: m.effort_fraction[j]) for j in nonbasic
            },
            nonbasic_routing={
                labels[j]: result.estimate(lambda m, j=j: m.routing_fraction[j]) for j in nonbasic
            },
            sojourn=result.estimate(lambda m: m.sojourn_mean),
        )

    @staticmethod
    def _trends(points: list[VerificationPoint], prediction: LimitPrediction) -> dict[str, bool]:
        """Trend checks along decreasing r, one increase tolerated."""
        total_error = [abs(p.weighted_workload.mean - prediction.m) for p in points]
        server_error = [
            max(
                abs(est.mean - target) / target
                for est, target in zip(p.per_server_workload, np.asarray(prediction.per_server_mean))
            )
            for p in points
        ]
        return {
            "weighted_workload_converges": is_decreasing_trend(total_error),
            "per_server_converges": is_decreasing_trend(server_error),
            "ks_decreases": is_decreasing_trend([p.ks_distance for p in points]),
        }

    @staticmethod
    def sweep_heavy_traffic(
        config: SystemConfig,
        spec: ExperimentSpec,
        analysis: AnalysisResult,
        seed: int,
        *,
        jobs: int = 1,
    ) -> list[VerificationReport]:
        """Replicated runs at every r for every policy, measured against the predicted limit.

        Non-monotone convergence is reported as a warning, never as a failure.

        Raises:
            ExperimentError: the topology has no prediction (heavy traffic or CRP fails).
        """
        if analysis.prediction is None or analysis.dual is None or not analysis.crp:
            raise ExperimentError(f"{config.name}: no heavy-traffic prediction (relaxed CRP does not hold)")
        prediction = analysis.prediction
        dual = analysis.dual
        r_values = sorted(spec.heavy_traffic_points(get_settings().r_values), reverse=True)
        replications = LabService.replications_for(spec)
        reports = []
        for policy_spec in spec.policies:
            base = LabService.config_for(config, policy_spec)
            points = []
            for index, r in enumerate(r_values):
                scaled = TopologyService.scale_arrivals(base, r)
                horizon, warmup = LabService.horizon_for(spec, r)
                logger.info(
                    "Sweep %s %s: r=%g horizon=%g replications=%d",
                    spec.name,
                    policy_spec.name,
                    r,
                    horizon,
                    replications,
                )
                result = LabService.replicate(
                    scaled,
                    policy_spec,
                    horizon=horizon,
                    warmup=warmup,
                    seed=seed,
                    replications=replications,
                    dual=dual,
                    jobs=jobs,
                )
                points.append(
                    LabService._verification_point(
                        result, scaled, dual, prediction, r, horizon, warmup, seed, index
                    )
                )
            trends = LabService._trends(points, prediction)
            warnings = [f"{name} fails along r={r_values}" for name, ok in trends.items() if not ok]
            for warning in warnings:
                logger.warning("%s %s: %s", spec.name, policy_spec.name, warning)
            reports.append(
                VerificationReport(
                    experiment=spec.name,
                    topology=config.name,
                    policy=policy_spec.name,
                    seed=seed,
                    schema_version=get_report_schema_version(),
                    prediction=AllocationService.prediction_out(prediction),
                    points=points,
                    trends=trends,
                    warnings=warnings,
                )
            )
        return reports

    @staticmethod
    def ssc_report(report: VerificationReport) -> SscReport:
        """Gap T_(K) - T_(1) along the sweep: bounded while T_(K) grows like 1/r."""
        points = sorted(report.points, key=lambda p: p.r, reverse=True)
        rows = [
            SscRow(
                r=p.r,
                gap=p.gap.mean,
                gap_sq=p.gap_sq.mean,
                top=p.top.mean,
                ratio=p.gap.mean / p.top.mean if p.top.mean > 0 else 0.0,
            )
            for p in points
        ]
        gaps = [row.gap for row in rows]
        if max(gaps, default=0.0) <= 0.0:
            gap_bounded = True
        else:
            exponent, _ = fit_power_law([row.r for row in rows], gaps)
            gap_bounded = bool(np.isnan(exponent) or exponent > -0.5)
        top_grows = is_decreasing_trend([-row.top for row in rows])
        first, last = rows[0].ratio, rows[-1].ratio
        ratio_shrinks = first <= 0.0 or last < 0.25 * first
        if not gap_bounded:
            logger.warning("%s: state-space collapse gap grows as r decreases: %s", report.policy, gaps)
        return SscReport(
            policy=report.policy,
            rows=rows,
            gap_bounded=gap_bounded,
            top_grows=top_grows,
            ratio_shrinks=ratio_shrinks,
        )

    @staticmethod
    def moment_trends(report: VerificationReport) -> MomentTrendReport:
        """Dual-weighted queue moments and non-basic fractions with power-law exponents in r."""
        points = sorted(report.points, key=lambda p: p.r, reverse=True)
        rows = [
            MomentTrendRow(
                r=p.r,
                dual_queue=p.dual_queue.mean,
                nonbasic_dual_queue=p.nonbasic_dual_queue.mean,
                idle_weighted_workload=[est.mean for est in p.idle_weighted_workload],
                nonbasic_effort={label: est.mean for label, est in p.nonbasic_effort.items()},
                nonbasic_routing={label: est.mean for label, est in p.nonbasic_routing.items()},
            )
            for p in points
        ]
        r_values = [row.r for row in rows]
        series: dict[str, list[float]] = {
            "dual_queue": [row.dual_queue for row in rows],
            "nonbasic_dual_queue": [row.nonbasic_dual_queue for row in rows],
        }
        first = rows[0]
        for k in range(len(first.idle_weighted_workload)):
            series[f"idle_weighted_workload server {k + 1}"] = [row.idle_weighted_workload[k] for row in rows]
        for label in first.nonbasic_effort:
            series[f"effort {label}"] = [row.nonbasic_effort[label] for row in rows]
            series[f"routing {label}"] = [row.nonbasic_routing[label] for row in rows]
        exponents = {name: fit_power_law(r_values, values)[0] for name, values in series.items()}
        return MomentTrendReport(policy=report.policy, rows=rows, exponents=exponents)

    @staticmethod
    def scheduling_invariance(reports: Sequence[VerificationReport]) -> InvarianceReport:
        """Compare r E[sum u W] across policies at the smallest r they share."""
        common = set.intersection(*({p.r for p in report.points} for report in reports))
        if not common:
            raise ExperimentError("reports share no r value")
        r = min(common)
        estimates = {
            report.policy: next(p.weighted_workload for p in report.points if p.r == r) for report in reports
        }
        values = list(estimates.values())
        overlap = all(a.overlaps(b) for n, a in enumerate(values) for b in values[n + 1:])
        if not overlap:
            logger.warning("Scheduling invariance: intervals at r=%g do not overlap", r)
        return InvarianceReport(r=r, estimates=estimates, overlap=overlap)

    @staticmethod
    def tie_break_check(
        config: SystemConfig,
        spec: ExperimentSpec,
        analysis: AnalysisResult,
        seed: int,
        *,
        jobs: int = 1,
    ) -> InvarianceReport:
        """Smallest-index versus random tie-breaking for the first routed policy, at the smallest r."""
        policy_spec = next((p for p in spec.policies if not p.is_delayed), None)
        if policy_spec is None:
            raise ExperimentError(f"{spec.name}: no routed policy to check tie-breaking on")
        r = min(spec.heavy_traffic_points(get_settings().r_values))
        horizon, warmup = LabService.horizon_for(spec, r)
        scaled = TopologyService.scale_arrivals(LabService.config_for(config, policy_spec), r)
        estimates = {}
        for random_tie_break in (False, True):
            variant = policy_spec.model_copy(update={"random_tie_break": random_tie_break})
            result = LabService.replicate(
                scaled,
                variant,
                horizon=horizon,
                warmup=warmup,
                seed=seed,
                replications=LabService.replications_for(spec),
                dual=analysis.dual,
                jobs=jobs,
            )
            name = "random" if random_tie_break else "smallest_index"
            estimates[name] = result.estimate(lambda m: r * m.mean_weighted_workload)
        overlap = estimates["random"].overlaps(estimates["smallest_index"])
        if not overlap:
            logger.warning("Tie-break check: intervals at r=%g do not overlap", r)
        return InvarianceReport(r=r, estimates=estimates, overlap=overlap)

    @staticmethod
    def compare_policies(
        config: SystemConfig,
        spec: ExperimentSpec,
        seed: int,
        *,
        dual: DualSolution | None = None,
        jobs: int = 1,
    ) -> list[ComparisonRow]:
        """Mean completion time and queue length per (policy, load), with Student-t half-widths."""
        if spec.loads is not None:
            loads = spec.loads
        else:
            loads = [1.0 - r for r in spec.heavy_traffic_points(get_settings().r_values)]
        replications = LabService.replications_for(spec)
        rows: list[ComparisonRow] = []
        for load in loads:
            r = 1.0 - load
            horizon, warmup = LabService.horizon_for(spec, r)
            for policy_spec in spec.policies:
                scaled = TopologyService.scale_to_load(LabService.config_for(config, policy_spec), load)
                result = LabService.replicate(
                    scaled,
                    policy_spec,
                    horizon=horizon,
                    warmup=warmup,
                    seed=seed,
                    replications=replications,
                    dual=dual,
                    jobs=jobs,
                )
                for metric, est in (
                    ("completion_time", result.estimate(lambda m: m.sojourn_mean)),
                    ("total_queue", result.estimate(lambda m: m.mean_total_queue)),
                ):
                    rows.append(
                        ComparisonRow(
                            policy=policy_spec.name,
                            load=load,
                            metric=metric,
                            mean=est.mean,
                            ci_half_width=est.ci_half_width,
                        )
                    )
        return rows

    @staticmethod
    def stability_probe(
        config: SystemConfig,
        policy_spec: PolicySpec,
        load: float,
        seed: int,
        *,
        horizon: float | None = None,
        doublings: int | None = None,
    ) -> StabilityReport:
        """Judge whether the queue diverges from runs at doubling horizons.

        Every horizon is simulated from an empty system on the same substream, so each
        shorter run is a prefix of the longest sample path.

        Divergent when the end-of-run queue grows linearly in the horizon (slope and R^2
        above their thresholds). Anything else is reported stable, including runs whose
        time-average queue has not settled yet; `settled` records whether it changed by
        less than the threshold over the last doubling, and a warning is logged when not.
        """
        settings = get_settings()
        base = horizon if horizon is not None else settings.base_horizon
        count = doublings if doublings is not None else settings.probe_doublings
        scaled = TopologyService.scale_to_load(LabService.config_for(config, policy_spec), load)
        horizons = [base * 2**n for n in range(count)]
        runs = [SimulationService.run(scaled, policy_spec, h, 0.0, seed) for h in horizons]
        end_queues = [m.final_total_queue for m in runs]
        averages = [m.mean_total_queue for m in runs]
        fit = linear_fit(horizons, end_queues)
        previous = averages[-2] if len(averages) > 1 else averages[-1]
        relative_change = abs(averages[-1] - previous) / previous if previous > 0 else 0.0
        divergent = fit.slope > settings.divergence_slope and fit.r2 > settings.divergence_r2
        settled = relative_change < settings.stable_relative_change
        verdict = StabilityVerdict.DIVERGENT if divergent else StabilityVerdict.STABLE
        if not divergent and not settled:
            logger.warning(
                "Probe %s at load %g: no linear growth but time-average queue still moved %.1f%%",
                policy_spec.name,
                load,
                100 * relative_change,
            )
        logger.info(
            "Probe %s at load %g: %s (slope=%.4g, R2=%.3f)",
            policy_spec.name,
            load,
            verdict.value,
            fit.slope,
            fit.r2,
        )
        return StabilityReport(
            policy=policy_spec.name,
            load=load,
            verdict=verdict,
            horizons=horizons,
            end_queues=end_queues,
            time_average_queues=averages,
            slope=fit.slope,
            r2=fit.r2,
            relative_change=relative_change,
            settled=settled,
        )
