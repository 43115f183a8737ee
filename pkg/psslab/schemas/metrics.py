"""Pydantic schema for the statistics of a simulation run."""

from __future__ import annotations

from pydantic import BaseModel, Field

from psslab.models.system import Architecture


class MetricsReport(BaseModel):
    """Time averages over [warmup, horizon] of one run, or of several merged runs.

    Per-activity lists follow declaration order, per-class and per-server lists
    follow 0-based ids.
    """

    topology: str = Field(..., description="Topology name")
    policy: str = Field(..., description="Policy name")
    architecture: Architecture
    seed: int
    replication: int = Field(0, description="First replication index of the runs merged here")
    runs: int = Field(1, description="Number of merged runs")
    horizon: float
    warmup: float
    elapsed: float = Field(..., description="Total observed time after warmup")
    events: int
    arrival_rates: list[float]
    u: list[float] = Field(..., description="Server weights used for weighted workloads")
    v: list[float] = Field(..., description="Class weights used for dual-weighted queues")

    mean_queue: list[float] = Field(..., description="Time-average z_j per activity")
    mean_class_waiting: list[float] = Field(..., description="Time-average waiting jobs per class queue")
    mean_total_queue: float = Field(..., description="Time-average number of jobs in system")
    final_total_queue: float = Field(..., description="Jobs in system at the horizon, averaged over runs")
    mean_workload: list[float] = Field(..., description="Time-average W_k")
    mean_weighted_workload: float = Field(..., description="Time-average of sum u_k W_k")
    second_moment_weighted_workload: float
    mean_gap: float = Field(..., description="Time-average of T_(K) - T_(1) with T_k = W_k / u_k")
    mean_gap_sq: float
    mean_top: float = Field(..., description="Time-average of T_(K)")
    mean_orthogonal: float = Field(..., description="Time-average norm of W orthogonal to u")
    idle_fraction: list[float] = Field(..., description="Fraction of time each server is idle")
    idle_weighted_workload: list[float] = Field(
        ..., description="Time-average of (sum u W) while each server is idle"
    )
    effort_fraction: list[float] = Field(..., description="Time-average P_ik per activity")
    routing_fraction: list[float] = Field(..., description="Share of class-i routings sent to each activity")
    mean_dual_queue: float = Field(..., description="Time-average of sum v_i z_ik")
    mean_nonbasic_dual_queue: float = Field(
        ..., description="Same sum restricted to positive-slack activities"
    )

    arrivals: list[int]
    routings: list[int]
    departures: list[int]
    sojourn_mean: float
    sojourn_variance: float
    sojourn_count: int

    weighted_samples: list[tuple[float, float]] = Field(
        default_factory=list,
        exclude=True,
        description="(sum u W, holding time) pairs kept by the reservoir",
    )
