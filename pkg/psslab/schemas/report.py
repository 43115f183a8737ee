"""Pydantic schemas for analysis, verification, comparison and probe reports."""

from __future__ import annotations

from enum import Enum

from pydantic import BaseModel, Field

from psslab.models.allocation import ActivityStatus


class MetricEstimate(BaseModel):
    """Mean over replications with a Student-t half-width."""

    mean: float
    ci_half_width: float
    n: int

    @property
    def low(self) -> float:
        return self.mean - self.ci_half_width

    @property
    def high(self) -> float:
        return self.mean + self.ci_half_width

    def overlaps(self, other: MetricEstimate) -> bool:
        return self.low <= other.high and other.low <= self.high


class PredictionOut(BaseModel):
    """Heavy-traffic limit of the scaled workloads."""

    m: float = Field(..., description="sum lambda_i v_i^2, limit mean of r sum u_k W_k")
    x_mean: float = Field(..., description="Mean of the exponential limit variable")
    per_server_mean: list[float] = Field(..., description="Limit mean of r W_k")
    total_weighted_mean: float
    queue_weighted_mean: float = Field(..., description="Limit mean of r sum v_i Z_ik")


class ActivityRecordOut(BaseModel):
    label: str
    max_x: float
    status: ActivityStatus
    d: float


class EdgeOut(BaseModel):
    """Communication edge between two 1-based servers, with the 1-based classes certifying it."""

    servers: tuple[int, int]
    classes: list[int]


class AnalysisReport(BaseModel):
    """Output of `analyze`: LP solution, classification, duals and prediction."""

    topology: str
    schema_version: str
    rho_star: float
    x_optimal: list[float]
    heavy_traffic: bool
    max_min_utilization: float
    x_witness: list[float] | None = None
    activity_report: list[ActivityRecordOut] = Field(default_factory=list)
    non_basic: list[str] = Field(default_factory=list)
    edges: list[EdgeOut] = Field(default_factory=list)
    crp: bool = False
    u: list[float] | None = None
    v: list[float] | None = None
    d: list[float] | None = None
    dual_source: str | None = Field(None, description="propagation | lp")
    dual_agreement: float | None = Field(
        None, description="Max entrywise gap between propagated and LP duals"
    )
    prediction: PredictionOut | None = None


class BarResiduals(BaseModel):
    """Residuals of the idle-time and flow-balance identities; signed."""

    idle: float = Field(..., description="sum u_k idle_k + sum d_j effort_j - r")
    flow: list[float] = Field(..., description="lambda_i routeFrac_j - mu_j effort_j per activity")


class VerificationPoint(BaseModel):
    """Everything measured at one r, each as a replication estimate."""

    r: float
    horizon: float
    warmup: float
    replications: int
    weighted_workload: MetricEstimate = Field(..., description="r E[sum u_k W_k]")
    per_server_workload: list[MetricEstimate] = Field(..., description="r E[W_k]")
    ks_distance: float = Field(..., description="Weighted KS of pooled r sum u W samples against Exp(m)")
    ks_distance_resampled: float = Field(..., description="Same distance on a weight-resampled sequence")
    idle_residual: MetricEstimate
    flow_residuals: list[MetricEstimate]
    gap: MetricEstimate = Field(..., description="E[T_(K) - T_(1)]")
    gap_sq: MetricEstimate
    top: MetricEstimate = Field(..., description="E[T_(K)]")
    orthogonal: MetricEstimate = Field(..., description="E[norm of W orthogonal to u]")
    dual_queue: MetricEstimate = Field(..., description="r E[sum v_i Z_ik]")
    nonbasic_dual_queue: MetricEstimate = Field(
        ..., description="r E[sum over positive-slack activities of v_i Z_ik]"
    )
    idle_weighted_workload: list[MetricEstimate] = Field(..., description="r E[sum u W ; server k idle]")
    nonbasic_effort: dict[str, MetricEstimate] = Field(default_factory=dict)
    nonbasic_routing: dict[str, MetricEstimate] = Field(default_factory=dict)
    sojourn: MetricEstimate


class VerificationReport(BaseModel):
    """Heavy-traffic sweep of one policy against the predicted limit."""

    experiment: str
    topology: str
    policy: str
    seed: int
    schema_version: str
    prediction: PredictionOut
    points: list[VerificationPoint]
    trends: dict[str, bool] = Field(default_factory=dict, description="Trend checks across the sweep")
    warnings: list[str] = Field(default_factory=list)


class SscRow(BaseModel):
    r: float
    gap: float
    gap_sq: float
    top: float
    ratio: float = Field(..., description="gap / top")


class SscReport(BaseModel):
    """Workload balance across servers along a sweep."""

    policy: str
    rows: list[SscRow]
    gap_bounded: bool
    top_grows: bool
    ratio_shrinks: bool

    @property
    def passed(self) -> bool:
        return self.gap_bounded and self.top_grows


class MomentTrendRow(BaseModel):
    r: float
    dual_queue: float
    nonbasic_dual_queue: float
    idle_weighted_workload: list[float]
    nonbasic_effort: dict[str, float] = Field(default_factory=dict)
    nonbasic_routing: dict[str, float] = Field(default_factory=dict)


class MomentTrendReport(BaseModel):
    """Sweep rows with power-law exponents fitted against r."""

    policy: str
    rows: list[MomentTrendRow]
    exponents: dict[str, float] = Field(default_factory=dict)


class InvarianceReport(BaseModel):
    """r E[sum u W] of several variants at one r, and whether their intervals overlap."""

    r: float
    estimates: dict[str, MetricEstimate]
    overlap: bool


class ComparisonRow(BaseModel):
    """One CSV row of a policy comparison."""

    policy: str
    load: float
    metric: str
    mean: float
    ci_half_width: float


class StabilityVerdict(str, Enum):
    STABLE = "stable"
    DIVERGENT = "divergent"


class StabilityReport(BaseModel):
    """Doubling-horizon probe of one policy at one load."""

    policy: str
    load: float
    verdict: StabilityVerdict
    horizons: list[float]
    end_queues: list[float]
    time_average_queues: list[float]
    slope: float
    r2: float
    relative_change: float
    settled: bool


class ArtifactEntry(BaseModel):
    path: str = Field(..., description="Path relative to the output directory")
    sha256: str
    size_bytes: int


class Manifest(BaseModel):
    """Self-description of a CLI run; contains nothing time-dependent."""

    command: str
    project_version: str
    schema_version: str
    topology: str | None = None
    experiment: str | None = None
    seed: int
    config_hash: str
    exit_code: int = 0
    artifacts: list[ArtifactEntry] = Field(default_factory=list)
    verdicts: dict[str, str] = Field(default_factory=dict)
