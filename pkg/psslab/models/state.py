"""Mutable simulation state of one chain."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from psslab.models.metrics import MetricsAccumulator, WorkloadWeights
from psslab.models.policy import Policy
from psslab.models.system import SystemConfig
from psslab.utils.rng import RandomStream


@dataclass(slots=True)
class Job:
    """A job in the system; `arrival_time` is used for its sojourn time.

    `routed` is set once the job's routing to an activity was counted, that is when
    it was assigned to a buffer or started service after warmup.
    """

    class_id: int
    arrival_time: float
    routed: bool = False


@dataclass(frozen=True)
class EngineTables:
    """Per-run lookup tables derived from the topology and the workload weights."""

    workload_matrix: np.ndarray  # K x J, m_j where activity j runs on server k
    server_matrix: np.ndarray  # K x J, 0/1
    class_dual: np.ndarray  # J, v_i of the activity's class
    nonbasic_dual: np.ndarray  # J, v_i on activities with positive slack, else 0
    arrival_cumsum: np.ndarray  # I
    servers: np.ndarray  # J, server of each activity

    @classmethod
    def build(cls, config: SystemConfig, weights: WorkloadWeights, arrival_rates: np.ndarray) -> EngineTables:
        K, J = config.num_servers, config.num_activities
        servers = np.array([a.server_id for a in config.activities], dtype=np.int64)
        classes = np.array([a.class_id for a in config.activities], dtype=np.int64)
        server_matrix = np.zeros((K, J))
        server_matrix[servers, np.arange(J)] = 1.0
        class_dual = weights.v[classes]
        return cls(
            workload_matrix=server_matrix * config.mean_service_times[np.newaxis, :],
            server_matrix=server_matrix,
            class_dual=class_dual,
            nonbasic_dual=np.where(weights.nonbasic, class_dual, 0.0),
            arrival_cumsum=np.cumsum(arrival_rates),
            servers=servers,
        )


@dataclass(slots=True)
class SimState:
    """State of one running chain. Owned by a single engine call, never shared.

    `z` is the queue vector policies read. Immediate architecture: `z[j]` counts jobs
    in buffer j including the one in service. Delayed architecture: `z[j]` is 1 while
    server k serves class i for j = (i,k), and `waiting[i]` counts queued class-i jobs.
    """

    config: SystemConfig
    policy: Policy
    rng: RandomStream
    accumulator: MetricsAccumulator
    weights: WorkloadWeights
    tables: EngineTables
    arrival_rates: np.ndarray
    clock: float = 0.0
    events: int = 0
    z: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    waiting: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    buffers: list[deque[Job]] = field(default_factory=list)
    class_queues: list[deque[Job]] = field(default_factory=list)
    in_service: list[Job | None] = field(default_factory=list)
    shares: np.ndarray = field(default_factory=lambda: np.zeros(0))
    completion_rates: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def empty(
        cls,
        config: SystemConfig,
        policy: Policy,
        rng: RandomStream,
        accumulator: MetricsAccumulator,
        weights: WorkloadWeights,
        arrival_rates: np.ndarray,
    ) -> SimState:
        """An empty system at time zero."""
        I, K, J = config.num_classes, config.num_servers, config.num_activities
        rates = np.asarray(arrival_rates, dtype=np.float64)
        return cls(
            config=config,
            policy=policy,
            rng=rng,
            accumulator=accumulator,
            weights=weights,
            tables=EngineTables.build(config, weights, rates),
            arrival_rates=rates,
            z=np.zeros(J, dtype=np.int64),
            waiting=np.zeros(I, dtype=np.int64),
            buffers=[deque() for _ in range(J)],
            class_queues=[deque() for _ in range(I)],
            in_service=[None] * K,
            shares=np.zeros(J),
            completion_rates=np.zeros(J),
        )

    def total_jobs(self) -> int:
        return int(self.z.sum()) + int(self.waiting.sum())
