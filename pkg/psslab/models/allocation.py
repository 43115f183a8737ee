"""Results of the static allocation LP, its dual and the heavy-traffic limit."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class ActivityStatus(str, Enum):
    """Classification of an activity over the optimal polytope."""

    BASIC_CAPABLE = "basic_capable"  # positive in some optimal x*
    STRICTLY_NON_BASIC = "strictly_non_basic"  # zero in every optimal x*


@dataclass(frozen=True)
class PrimalSolution:
    """Optimal (x, rho) of the static allocation problem."""

    x: np.ndarray
    rho: float


@dataclass(frozen=True)
class HeavyTrafficCheck:
    """Outcome of the relaxed heavy-traffic feasibility test.

    `witness` is some x* >= 0 with Rx* = lambda and Ax* = e, or None; in that case
    `max_min_utilization` is the largest achievable smallest server utilization.
    """

    witness: np.ndarray | None
    max_min_utilization: float

    @property
    def holds(self) -> bool:
        return self.witness is not None


@dataclass(frozen=True)
class DualSolution:
    """Dual vectors (v, u) and slacks d_j = u_k - mu_ik v_i."""

    v: np.ndarray
    u: np.ndarray
    d: np.ndarray

    def objective(self, arrival_rates: np.ndarray) -> float:
        return float(np.dot(self.v, arrival_rates))

    def violations(self, arrival_rates: np.ndarray, tol: float) -> list[str]:
        """Invariants that fail: v.lambda = 1, sum u = 1, u > 0, v > 0, d >= -tol."""
        problems: list[str] = []
        if abs(self.objective(arrival_rates) - 1.0) > tol:
            problems.append(f"sum lambda_i v_i = {self.objective(arrival_rates):.12g}, expected 1")
        if abs(float(self.u.sum()) - 1.0) > tol:
            problems.append(f"sum u_k = {float(self.u.sum()):.12g}, expected 1")
        if np.any(self.u <= 0):
            problems.append("u has non-positive entries")
        if np.any(self.v <= 0):
            problems.append("v has non-positive entries")
        if np.any(self.d < -tol):
            problems.append("dual slack d has negative entries")
        return problems


@dataclass(frozen=True)
class ActivityRecord:
    """Classification of a single activity."""

    index: int
    label: str
    max_x: float
    status: ActivityStatus
    d: float


@dataclass(frozen=True)
class ActivityReport:
    """Per-activity classification over the optimal polytope."""

    records: tuple[ActivityRecord, ...]

    @property
    def non_basic(self) -> list[int]:
        return [r.index for r in self.records if r.status is ActivityStatus.STRICTLY_NON_BASIC]

    @property
    def basic_capable(self) -> list[int]:
        return [r.index for r in self.records if r.status is ActivityStatus.BASIC_CAPABLE]

    def is_basic_capable(self, j: int) -> bool:
        return self.records[j].status is ActivityStatus.BASIC_CAPABLE


@dataclass(frozen=True)
class LimitPrediction:
    """Heavy-traffic limit: r W(Z) -> u X with X exponential of mean x_mean."""

    m: float
    x_mean: float
    per_server_mean: np.ndarray
    total_weighted_mean: float
    queue_weighted_mean: float = field(default=0.0)


@dataclass(frozen=True)
class AnalysisResult:
    """Everything the allocation module derives from one topology.

    Fields after `heavy_traffic` are None when relaxed heavy traffic fails;
    `dual_by_propagation` is None when CRP fails.
    """

    primal: PrimalSolution
    heavy_traffic: HeavyTrafficCheck
    activity_report: ActivityReport | None = None
    edges: tuple[tuple[int, int, tuple[int, ...]], ...] = ()
    crp: bool = False
    dual_by_lp: DualSolution | None = None
    dual_by_propagation: DualSolution | None = None
    prediction: LimitPrediction | None = None

    @property
    def dual(self) -> DualSolution | None:
        """Propagated dual when available, LP dual otherwise."""
        return self.dual_by_propagation or self.dual_by_lp
