"""Builders for verification reports with chosen estimates."""

from __future__ import annotations

from psslab.schemas.report import MetricEstimate, PredictionOut, VerificationPoint, VerificationReport


def _est(mean: float, half_width: float = 0.0) -> MetricEstimate:
    return MetricEstimate(mean=mean, ci_half_width=half_width, n=10)


def make_point(
    r: float,
    *,
    weighted: float = 0.3,
    half_width: float = 0.01,
    gap: float = 1.0,
    top: float = 10.0,
    dual_queue: float = 0.3,
    nonbasic_dual_queue: float = 0.01,
    effort: dict[str, float] | None = None,
) -> VerificationPoint:
    effort = effort or {}
    return VerificationPoint(
        r=r,
        horizon=1000.0,
        warmup=100.0,
        replications=10,
        weighted_workload=_est(weighted, half_width),
        per_server_workload=[_est(weighted * 0.8), _est(weighted * 0.2)],
        ks_distance=0.05,
        ks_distance_resampled=0.06,
        idle_residual=_est(0.0),
        flow_residuals=[_est(0.0)],
        gap=_est(gap),
        gap_sq=_est(gap * gap),
        top=_est(top),
        orthogonal=_est(gap / 2),
        dual_queue=_est(dual_queue),
        nonbasic_dual_queue=_est(nonbasic_dual_queue),
        idle_weighted_workload=[_est(r), _est(r)],
        nonbasic_effort={label: _est(value) for label, value in effort.items()},
        nonbasic_routing={label: _est(value) for label, value in effort.items()},
        sojourn=_est(5.0),
    )


def make_verification_report(policy: str, points: list[VerificationPoint]) -> VerificationReport:
    return VerificationReport(
        experiment="test",
        topology="w_model",
        policy=policy,
        seed=0,
        schema_version="1.0",
        prediction=PredictionOut(
            m=0.264,
            x_mean=0.388,
            per_server_mean=[0.31, 0.078],
            total_weighted_mean=0.264,
            queue_weighted_mean=0.264,
        ),
        points=points,
    )
