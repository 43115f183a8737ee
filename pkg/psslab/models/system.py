"""System topology model: classes, servers, activities and their matrices."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property

import numpy as np


class Architecture(str, Enum):
    """Routing architecture of the system."""

    IMMEDIATE = "immediate"  # jobs routed on arrival to per-server buffers
    DELAYED = "delayed"  # jobs wait in class queues until a server picks them


@dataclass(frozen=True)
class Activity:
    """A (class, server) pair with its service rate. Ids are 0-based."""

    class_id: int
    server_id: int
    rate: float

    @property
    def mean_service_time(self) -> float:
        """m_ik = 1 / mu_ik."""
        return 1.0 / self.rate

    @property
    def label(self) -> str:
        """1-based "(i,k)" label used in reports."""
        return f"({self.class_id + 1},{self.server_id + 1})"


@dataclass(frozen=True)
class SystemConfig:
    """Immutable system topology.

    Activities keep declaration order; every per-activity vector in the lab
    (x, d, queue lengths, effort shares) is indexed by that order.
    """

    num_classes: int
    num_servers: int
    activities: tuple[Activity, ...]
    arrival_rates: tuple[float, ...]
    architecture: Architecture = Architecture.IMMEDIATE
    name: str = field(default="system", compare=False)

    @property
    def num_activities(self) -> int:
        return len(self.activities)

    @cached_property
    def activities_of_server(self) -> tuple[tuple[int, ...], ...]:
        """Activity indices j served by each server k (the set I(k) as activities)."""
        groups: list[list[int]] = [[] for _ in range(self.num_servers)]
        for j, activity in enumerate(self.activities):
            groups[activity.server_id].append(j)
        return tuple(tuple(g) for g in groups)

    @cached_property
    def activities_of_class(self) -> tuple[tuple[int, ...], ...]:
        """Activity indices j available to each class i (the set K(i) as activities)."""
        groups: list[list[int]] = [[] for _ in range(self.num_classes)]
        for j, activity in enumerate(self.activities):
            groups[activity.class_id].append(j)
        return tuple(tuple(g) for g in groups)

    @cached_property
    def activity_index(self) -> dict[tuple[int, int], int]:
        """Map (class_id, server_id) -> activity index j."""
        return {(a.class_id, a.server_id): j for j, a in enumerate(self.activities)}

    @cached_property
    def rates(self) -> np.ndarray:
        return np.array([a.rate for a in self.activities], dtype=np.float64)

    @cached_property
    def mean_service_times(self) -> np.ndarray:
        return 1.0 / self.rates

    @property
    def labels(self) -> list[str]:
        return [a.label for a in self.activities]

    def find_activity(self, class_id: int, server_id: int) -> int | None:
        """Return the activity index of (class_id, server_id), 0-based, or None."""
        return self.activity_index.get((class_id, server_id))

    def with_arrival_rates(self, arrival_rates: tuple[float, ...]) -> SystemConfig:
        return replace(self, arrival_rates=tuple(float(x) for x in arrival_rates))

    def with_architecture(self, architecture: Architecture) -> SystemConfig:
        return replace(self, architecture=architecture)


@dataclass(frozen=True)
class SystemMatrices:
    """Constituency C (I x J), resource consumption A (K x J) and output R (I x J)."""

    C: np.ndarray
    A: np.ndarray
    R: np.ndarray

    @property
    def mu(self) -> np.ndarray:
        """Service rate per activity (the column sums of R)."""
        return self.R.sum(axis=0)

    @property
    def shape(self) -> tuple[int, int, int]:
        """(I, K, J)."""
        return self.C.shape[0], self.A.shape[0], self.C.shape[1]
