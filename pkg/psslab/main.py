"""Command-line front end: analyze, simulate, sweep, verify, compare and probe.

Exit codes:
    0  success
    1  topology or experiment file cannot be parsed or is invalid
    2  relaxed heavy traffic fails (no x >= 0 with Rx = lambda, Ax = e)
    3  relaxed complete resource pooling fails (communication graph disconnected)
    4  runtime error in the engine or the lab
"""

from __future__ import annotations

import argparse
import logging
from pathlib import Path
import sys
from typing import Sequence

from pydantic_settings import BaseSettings, SettingsConfigDict

from psslab.config import SettingsError, get_settings
from psslab.logging_config import setup_logging
from psslab.models.allocation import AnalysisResult
from psslab.models.errors import ExperimentError, PsslabError, TopologyError
from psslab.models.system import SystemConfig
from psslab.schemas.experiment import ExperimentSpec
from psslab.schemas.metrics import MetricsReport
from psslab.schemas.report import ArtifactEntry, MetricEstimate, VerificationPoint
from psslab.services.allocation_service import AllocationService
from psslab.services.artifact_service import ArtifactService
from psslab.services.lab_service import LabService, ReplicationResult
from psslab.services.topology_service import TopologyService

logger = logging.getLogger("psslab.cli")

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_HEAVY_TRAFFIC = 2
EXIT_CRP = 3
EXIT_RUNTIME = 4

ROW_HEADER = ("policy", "r", "metric", "mean", "ci_half_width")


class EnvOverrides(BaseSettings):
    """Environment overrides; only the seed may come from the environment."""

    model_config = SettingsConfigDict(env_prefix="PSSLAB_")

    seed: int | None = None


class CliInputError(PsslabError):
    """Raised when required command-line inputs are missing."""


def resolve_seed(flag: int | None) -> int:
    """--seed, else PSSLAB_SEED, else the configured default."""
    if flag is not None:
        return flag
    env_seed = EnvOverrides().seed
    if env_seed is not None:
        return env_seed
    return get_settings().default_seed


def _build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = argparse.ArgumentParser(
        prog="psslab",
        description="Heavy-traffic analysis and simulation of parallel-server systems.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    def add_common(sub: argparse.ArgumentParser, *, experiment: bool) -> None:
        sub.add_argument("--topology", type=Path, help="topology JSON file")
        if experiment:
            sub.add_argument("--experiment", type=Path, required=True, help="experiment JSON file")
        sub.add_argument(
            "--seed", type=int, default=None, help="base seed (default: PSSLAB_SEED, then config)"
        )
        sub.add_argument("--out", type=Path, default=None, help="output directory for artifacts")
        sub.add_argument(
            "--jobs",
            type=int,
            default=settings.default_jobs,
            help="parallel replications; 0 uses every core (default: %(default)s)",
        )
        sub.add_argument(
            "--format",
            choices=("csv", "json"),
            default=settings.default_format,
            help="per-point artifact format (default: %(default)s)",
        )
        sub.add_argument("--verbose", action="store_true", help="log at DEBUG level")

    analyze = subparsers.add_parser("analyze", help="LP analysis and heavy-traffic prediction")
    add_common(analyze, experiment=False)
    for name, help_text in (
        ("simulate", "replicated runs of every policy at every point"),
        ("sweep", "heavy-traffic sweep against the predicted limit"),
        ("verify", "sweep plus balance, moment, invariance and tie-break checks"),
        ("compare", "completion-time comparison across policies and loads"),
        ("probe", "doubling-horizon stability probe"),
    ):
        add_common(subparsers.add_parser(name, help=help_text), experiment=True)
    return parser


def _topology_path(args: argparse.Namespace, spec: ExperimentSpec | None) -> Path:
    if args.topology is not None:
        return args.topology
    if spec is not None and spec.topology is not None:
        return (args.experiment.parent / spec.topology).resolve()
    raise CliInputError("no topology given: pass --topology or set 'topology' in the experiment file")


def _point_rows(policy: str, r: float, estimates: dict[str, MetricEstimate]) -> list[tuple[object, ...]]:
    return [(policy, r, metric, est.mean, est.ci_half_width) for metric, est in estimates.items()]


def _verification_estimates(point: VerificationPoint, labels: list[str]) -> dict[str, MetricEstimate]:
    estimates = {
        "weighted_workload": point.weighted_workload,
        "idle_residual": point.idle_residual,
        "gap": point.gap,
        "gap_sq": point.gap_sq,
        "top": point.top,
        "orthogonal": point.orthogonal,
        "dual_queue": point.dual_queue,
        "nonbasic_dual_queue": point.nonbasic_dual_queue,
        "sojourn": point.sojourn,
    }
    for k, est in enumerate(point.per_server_workload):
        estimates[f"workload server {k + 1}"] = est
    for k, est in enumerate(point.idle_weighted_workload):
        estimates[f"idle_weighted_workload server {k + 1}"] = est
    for j, est in enumerate(point.flow_residuals):
        estimates[f"flow_residual {labels[j]}"] = est
    for label, est in point.nonbasic_effort.items():
        estimates[f"effort {label}"] = est
    for label, est in point.nonbasic_routing.items():
        estimates[f"routing {label}"] = est
    estimates["ks_distance"] = MetricEstimate(mean=point.ks_distance, ci_half_width=0.0, n=1)
    estimates["ks_distance_resampled"] = MetricEstimate(
        mean=point.ks_distance_resampled, ci_half_width=0.0, n=1
    )
    return estimates


def _analyze(config: SystemConfig, topology_path: Path, seed: int, out: Path | None) -> int:
    result = AllocationService.analyze(config)
    report = AllocationService.to_report(config, result)
    sys.stdout.write(report.model_dump_json(indent=2) + "\n")
    exit_code = _analysis_exit_code(result)
    if out is not None:
        artifacts = [ArtifactService.write_json(out, "analysis.json", report)]
        manifest = ArtifactService.build_manifest(
            "analyze", seed, artifacts, config=config, topology_path=topology_path, exit_code=exit_code
        )
        ArtifactService.write_manifest(out, manifest)
    return exit_code


def _analysis_exit_code(result: AnalysisResult) -> int:
    if not result.heavy_traffic.holds:
        logger.error(
            "Relaxed heavy traffic fails: best min-utilization %.6g", result.heavy_traffic.max_min_utilization
        )
        return EXIT_HEAVY_TRAFFIC
    if not result.crp:
        logger.error("Relaxed complete resource pooling fails")
        return EXIT_CRP
    return EXIT_OK


def _simulate(
    config: SystemConfig, spec: ExperimentSpec, seed: int, args: argparse.Namespace
) -> tuple[list[ArtifactEntry], dict[str, str]]:
    out: Path = args.out
    analysis = AllocationService.analyze(config)
    artifacts: list[ArtifactEntry] = []
    replications = LabService.replications_for(spec)
    for policy_spec in spec.policies:
        base = LabService.config_for(config, policy_spec)
        for r in spec.heavy_traffic_points(get_settings().r_values):
            scaled = TopologyService.scale_arrivals(base, r)
            horizon, warmup = LabService.horizon_for(spec, r)
            result: ReplicationResult = LabService.replicate(
                scaled,
                policy_spec,
                horizon=horizon,
                warmup=warmup,
                seed=seed,
                replications=replications,
                dual=analysis.dual,
                jobs=args.jobs,
            )
            if args.format == "json":
                name = ArtifactService.file_name(spec.name, policy_spec.name, r, "json")
                artifacts.append(ArtifactService.write_json(out, name, result.pooled))
            else:
                name = ArtifactService.file_name(spec.name, policy_spec.name, r)
                rows = _point_rows(policy_spec.name, r, result.summary())
                artifacts.append(ArtifactService.write_csv(out, name, ROW_HEADER, rows))
            if spec.spill_samples:
                artifacts.append(_spill(out, spec, policy_spec.name, r, result.pooled))
    return artifacts, {}


def _spill(out: Path, spec: ExperimentSpec, policy: str, r: float, pooled: MetricsReport) -> ArtifactEntry:
    name = ArtifactService.file_name(spec.name, f"{policy}_samples", r)
    return ArtifactService.write_csv(out, name, ("value", "weight"), pooled.weighted_samples)


def _sweep(
    config: SystemConfig, spec: ExperimentSpec, seed: int, args: argparse.Namespace, *, full: bool
) -> tuple[list[ArtifactEntry], dict[str, str]]:
    out: Path = args.out
    analysis = AllocationService.analyze(config)
    if not analysis.heavy_traffic.holds or not analysis.crp:
        raise _AnalysisFailure(_analysis_exit_code(analysis))
    reports = LabService.sweep_heavy_traffic(config, spec, analysis, seed, jobs=args.jobs)
    artifacts: list[ArtifactEntry] = []
    verdicts: dict[str, str] = {}
    for report in reports:
        for point in report.points:
            if args.format == "json":
                name = ArtifactService.file_name(spec.name, report.policy, point.r, "json")
                artifacts.append(ArtifactService.write_json(out, name, point))
            else:
                name = ArtifactService.file_name(spec.name, report.policy, point.r)
                rows = _point_rows(report.policy, point.r, _verification_estimates(point, config.labels))
                artifacts.append(ArtifactService.write_csv(out, name, ROW_HEADER, rows))
        for trend, ok in report.trends.items():
            verdicts[f"{report.policy} {trend}"] = "pass" if ok else "warn"
    artifacts.append(ArtifactService.write_json(out, f"{spec.name}_verification.json", reports))
    if not full:
        return artifacts, verdicts

    ssc = [LabService.ssc_report(report) for report in reports]
    artifacts.append(ArtifactService.write_json(out, f"{spec.name}_ssc.json", ssc))
    for report in ssc:
        verdicts[f"{report.policy} ssc"] = "pass" if report.passed else "warn"
    moments = [LabService.moment_trends(report) for report in reports]
    artifacts.append(ArtifactService.write_json(out, f"{spec.name}_moments.json", moments))
    if len(reports) > 1:
        invariance = LabService.scheduling_invariance(reports)
        artifacts.append(ArtifactService.write_json(out, f"{spec.name}_invariance.json", invariance))
        verdicts["scheduling invariance"] = "pass" if invariance.overlap else "warn"
    if spec.tie_break:
        tie_break = LabService.tie_break_check(config, spec, analysis, seed, jobs=args.jobs)
        artifacts.append(ArtifactService.write_json(out, f"{spec.name}_tie_break.json", tie_break))
        verdicts["tie break"] = "pass" if tie_break.overlap else "warn"
    return artifacts, verdicts


def _compare(
    config: SystemConfig, spec: ExperimentSpec, seed: int, args: argparse.Namespace
) -> tuple[list[ArtifactEntry], dict[str, str]]:
    analysis = AllocationService.analyze(config)
    rows = LabService.compare_policies(config, spec, seed, dual=analysis.dual, jobs=args.jobs)
    if args.format == "json":
        entry = ArtifactService.write_json(args.out, f"{spec.name}_comparison.json", rows)
    else:
        entry = ArtifactService.write_csv(
            args.out,
            f"{spec.name}_comparison.csv",
            ("policy", "load", "metric", "mean", "ci_half_width"),
            [(row.policy, row.load, row.metric, row.mean, row.ci_half_width) for row in rows],
        )
    return [entry], {}


def _probe(
    config: SystemConfig, spec: ExperimentSpec, seed: int, args: argparse.Namespace
) -> tuple[list[ArtifactEntry], dict[str, str]]:
    if spec.loads is not None:
        loads = spec.loads
    else:
        loads = [1.0 - r for r in spec.heavy_traffic_points(get_settings().r_values)]
    reports = [
        LabService.stability_probe(
            config, policy_spec, load, seed, horizon=spec.horizon, doublings=spec.doublings
        )
        for load in loads
        for policy_spec in spec.policies
    ]
    artifacts = [ArtifactService.write_json(args.out, f"{spec.name}_probe.json", reports)]
    verdicts = {f"{report.policy} @ {report.load:g}": report.verdict.value for report in reports}
    for name, verdict in verdicts.items():
        sys.stdout.write(f"{name}: {verdict}\n")
    return artifacts, verdicts


class _AnalysisFailure(Exception):
    def __init__(self, exit_code: int) -> None:
        super().__init__(exit_code)
        self.exit_code = exit_code


def run(argv: Sequence[str] | None = None) -> int:
    """Parse arguments, dispatch the subcommand and return its exit code."""
    try:
        settings = get_settings()
    except SettingsError as exc:
        sys.stderr.write(f"psslab: {exc}\n")
        return EXIT_PARSE
    args = _build_parser().parse_args(argv)
    log_dir = args.out / settings.log_dir if args.out is not None else None
    setup_logging(log_dir=log_dir, debug=settings.debug or args.verbose)
    seed = resolve_seed(args.seed)

    try:
        spec = LabService.load_experiment(args.experiment) if args.command != "analyze" else None
        topology_path = _topology_path(args, spec)
        config = TopologyService.load_topology(topology_path)
    except (TopologyError, ExperimentError, CliInputError) as exc:
        logger.error("%s", exc)
        for violation in getattr(exc, "violations", []):
            logger.error("  %s", violation)
        return EXIT_PARSE

    if args.command == "analyze":
        try:
            return _analyze(config, topology_path, seed, args.out)
        except PsslabError as exc:
            logger.error("Analysis failed: %s", exc)
            return EXIT_RUNTIME

    assert spec is not None
    if args.out is None:
        args.out = Path("results") / spec.name
    handlers = {
        "simulate": lambda: _simulate(config, spec, seed, args),
        "sweep": lambda: _sweep(config, spec, seed, args, full=False),
        "verify": lambda: _sweep(config, spec, seed, args, full=True),
        "compare": lambda: _compare(config, spec, seed, args),
        "probe": lambda: _probe(config, spec, seed, args),
    }
    exit_code = EXIT_OK
    artifacts: list[ArtifactEntry] = []
    verdicts: dict[str, str] = {}
    try:
        artifacts, verdicts = handlers[args.command]()
    except _AnalysisFailure as failure:
        exit_code = failure.exit_code
    except ExperimentError as exc:
        logger.error("Invalid experiment: %s", exc)
        exit_code = EXIT_PARSE
    except PsslabError as exc:
        logger.exception("%s failed: %s", args.command, exc)
        exit_code = EXIT_RUNTIME

    manifest = ArtifactService.build_manifest(
        args.command,
        seed,
        artifacts,
        config=config,
        experiment=spec,
        topology_path=topology_path,
        experiment_path=args.experiment,
        exit_code=exit_code,
        verdicts=verdicts,
    )
    ArtifactService.write_manifest(args.out, manifest)
    logger.info(
        "%s finished with exit code %d; %d artifacts in %s", args.command, exit_code, len(artifacts), args.out
    )
    return exit_code


def main() -> None:
    """CLI entrypoint."""
    sys.exit(run())


if __name__ == "__main__":
    main()
