"""Time-integrated statistics of a simulation run."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(slots=True)
class Reservoir:
    """Bounded sample of (value, holding time) pairs.

    Keeps every `stride`-th pair offered; when full, drops every other kept pair
    and doubles the stride. Merging concatenates, so the merged capacity is the sum.
    """

    capacity: int
    stride: int = 1
    seen: int = 0
    values: list[float] = field(default_factory=list)
    weights: list[float] = field(default_factory=list)

    def add(self, value: float, weight: float) -> None:
        if self.seen % self.stride == 0:
            self.values.append(value)
            self.weights.append(weight)
            if len(self.values) > self.capacity:
                self.values = self.values[::2]
                self.weights = self.weights[::2]
                self.stride *= 2
        self.seen += 1

    def merge(self, other: Reservoir) -> Reservoir:
        return Reservoir(
            capacity=self.capacity + other.capacity,
            stride=max(self.stride, other.stride),
            seen=self.seen + other.seen,
            values=self.values + other.values,
            weights=self.weights + other.weights,
        )

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class WorkloadWeights:
    """Server weights u, class weights v and the mask of activities with positive dual slack."""

    u: np.ndarray
    v: np.ndarray
    nonbasic: np.ndarray

    @classmethod
    def uniform(cls, num_classes: int, num_servers: int, num_activities: int) -> WorkloadWeights:
        """u = e, v = e, no activity flagged; used when the system has no dual solution."""
        return cls(
            u=np.ones(num_servers),
            v=np.ones(num_classes),
            nonbasic=np.zeros(num_activities, dtype=bool),
        )


@dataclass(slots=True)
class MetricsAccumulator:
    """Integrals over [warmup, horizon] of the pre-jump state, plus event counts.

    All integrals are nondecreasing in the clock. `merge` adds every field, so
    merging is associative and the pooled time averages weight each run by its
    elapsed time.
    """

    num_classes: int
    num_servers: int
    num_activities: int
    elapsed: float = 0.0
    runs: int = 1
    events: int = 0
    queue_integral: np.ndarray = field(default_factory=lambda: np.zeros(0))
    class_waiting_integral: np.ndarray = field(default_factory=lambda: np.zeros(0))
    total_queue_integral: float = 0.0
    workload_integral: np.ndarray = field(default_factory=lambda: np.zeros(0))
    weighted_workload_integral: float = 0.0
    weighted_workload_sq_integral: float = 0.0
    gap_integral: float = 0.0
    gap_sq_integral: float = 0.0
    top_integral: float = 0.0
    orthogonal_integral: float = 0.0
    idle_integral: np.ndarray = field(default_factory=lambda: np.zeros(0))
    idle_weighted_integral: np.ndarray = field(default_factory=lambda: np.zeros(0))
    effort_integral: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dual_queue_integral: float = 0.0
    nonbasic_dual_queue_integral: float = 0.0
    arrivals: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    routings: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    departures: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    sojourn_sum: float = 0.0
    sojourn_sq_sum: float = 0.0
    sojourn_count: int = 0
    final_total: int = 0
    reservoir: Reservoir = field(default_factory=lambda: Reservoir(capacity=0))

    @classmethod
    def create(
        cls, num_classes: int, num_servers: int, num_activities: int, capacity: int
    ) -> MetricsAccumulator:
        I, K, J = num_classes, num_servers, num_activities
        return cls(
            num_classes=I,
            num_servers=K,
            num_activities=J,
            queue_integral=np.zeros(J),
            class_waiting_integral=np.zeros(I),
            workload_integral=np.zeros(K),
            idle_integral=np.zeros(K),
            idle_weighted_integral=np.zeros(K),
            effort_integral=np.zeros(J),
            arrivals=np.zeros(I, dtype=np.int64),
            routings=np.zeros(J, dtype=np.int64),
            departures=np.zeros(J, dtype=np.int64),
            reservoir=Reservoir(capacity=capacity),
        )

    def integrate(
        self,
        dt: float,
        z: np.ndarray,
        waiting: np.ndarray,
        workloads: np.ndarray,
        idle: np.ndarray,
        shares: np.ndarray,
        weights: WorkloadWeights,
        dual_queue: float,
        nonbasic_dual_queue: float,
    ) -> None:
        """Add dt times the current state to every integral."""
        u = weights.u
        weighted = float(u @ workloads)
        normalized = workloads / u
        top = float(normalized.max())
        gap = top - float(normalized.min())
        orthogonal = workloads - (weighted / float(u @ u)) * u

        self.elapsed += dt
        self.queue_integral += dt * z
        self.class_waiting_integral += dt * waiting
        self.total_queue_integral += dt * (float(z.sum()) + float(waiting.sum()))
        self.workload_integral += dt * workloads
        self.weighted_workload_integral += dt * weighted
        self.weighted_workload_sq_integral += dt * weighted * weighted
        self.gap_integral += dt * gap
        self.gap_sq_integral += dt * gap * gap
        self.top_integral += dt * top
        self.orthogonal_integral += dt * float(np.linalg.norm(orthogonal))
        self.idle_integral += dt * idle
        self.idle_weighted_integral += (dt * weighted) * idle
        self.effort_integral += dt * shares
        self.dual_queue_integral += dt * dual_queue
        self.nonbasic_dual_queue_integral += dt * nonbasic_dual_queue
        self.reservoir.add(weighted, dt)

    def record_departure(self, activity: int, sojourn: float, routed: bool = True) -> None:
        """Sojourn of a job leaving inside the window; `routed` is False when its routing predates warmup."""
        if routed:
            self.departures[activity] += 1
        self.sojourn_sum += sojourn
        self.sojourn_sq_sum += sojourn * sojourn
        self.sojourn_count += 1

    def merge(self, other: MetricsAccumulator) -> MetricsAccumulator:
        """Field-wise sum of two accumulators over the same topology."""
        if (self.num_classes, self.num_servers, self.num_activities) != (
            other.num_classes,
            other.num_servers,
            other.num_activities,
        ):
            raise ValueError("cannot merge accumulators of different topologies")
        return MetricsAccumulator(
            num_classes=self.num_classes,
            num_servers=self.num_servers,
            num_activities=self.num_activities,
            elapsed=self.elapsed + other.elapsed,
            runs=self.runs + other.runs,
            events=self.events + other.events,
            queue_integral=self.queue_integral + other.queue_integral,
            class_waiting_integral=self.class_waiting_integral + other.class_waiting_integral,
            total_queue_integral=self.total_queue_integral + other.total_queue_integral,
            workload_integral=self.workload_integral + other.workload_integral,
            weighted_workload_integral=self.weighted_workload_integral + other.weighted_workload_integral,
            weighted_workload_sq_integral=self.weighted_workload_sq_integral
            + other.weighted_workload_sq_integral,
            gap_integral=self.gap_integral + other.gap_integral,
            gap_sq_integral=self.gap_sq_integral + other.gap_sq_integral,
            top_integral=self.top_integral + other.top_integral,
            orthogonal_integral=self.orthogonal_integral + other.orthogonal_integral,
            idle_integral=self.idle_integral + other.idle_integral,
            idle_weighted_integral=self.idle_weighted_integral + other.idle_weighted_integral,
            effort_integral=self.effort_integral + other.effort_integral,
            dual_queue_integral=self.dual_queue_integral + other.dual_queue_integral,
            nonbasic_dual_queue_integral=self.nonbasic_dual_queue_integral
            + other.nonbasic_dual_queue_integral,
            arrivals=self.arrivals + other.arrivals,
            routings=self.routings + other.routings,
            departures=self.departures + other.departures,
            sojourn_sum=self.sojourn_sum + other.sojourn_sum,
            sojourn_sq_sum=self.sojourn_sq_sum + other.sojourn_sq_sum,
            sojourn_count=self.sojourn_count + other.sojourn_count,
            final_total=self.final_total + other.final_total,
            reservoir=self.reservoir.merge(other.reservoir),
        )
