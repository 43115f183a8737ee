"""Canonical topologies built in code, mirroring the bundled JSON files."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from psslab.models.system import Activity, Architecture, SystemConfig

_ROOT = Path(__file__).resolve().parents[2]
TOPOLOGY_DIR = _ROOT / "common" / "topologies"
EXPERIMENT_DIR = _ROOT / "common" / "experiments"


def topology(
    arrival_rates: list[float],
    activities: list[tuple[int, int, float]],
    *,
    num_servers: int | None = None,
    architecture: Architecture = Architecture.IMMEDIATE,
    name: str = "test",
) -> SystemConfig:
    """Build a config from 1-based (class, server, rate) triples."""
    servers = num_servers if num_servers is not None else max(k for _, k, _ in activities)
    return SystemConfig(
        num_classes=len(arrival_rates),
        num_servers=servers,
        activities=tuple(Activity(class_id=i - 1, server_id=k - 1, rate=mu) for i, k, mu in activities),
        arrival_rates=tuple(arrival_rates),
        architecture=architecture,
        name=name,
    )


def n_model() -> SystemConfig:
    return topology([1.3, 0.4], [(1, 1, 1.0), (1, 2, 0.5), (2, 2, 1.0)], name="n_model")


def w_model() -> SystemConfig:
    return topology(
        [4.0, 1.3, 0.4],
        [(1, 1, 8.0), (2, 1, 2.0), (2, 2, 0.5), (3, 2, 1.0), (3, 1, 0.25), (1, 2, 0.25)],
        name="w_model",
    )


def x_model() -> SystemConfig:
    return topology(
        [1.3, 0.4], [(1, 1, 1.0), (1, 2, 0.5), (2, 2, 1.0), (2, 1, 1.0)], name="x_model"
    )


def mm1(arrival_rate: float = 0.5, service_rate: float = 1.0) -> SystemConfig:
    return topology([arrival_rate], [(1, 1, service_rate)], name="mm1")


def mm2(arrival_rate: float = 1.0) -> SystemConfig:
    return topology(
        [arrival_rate], [(1, 1, 1.0), (1, 2, 1.0)], architecture=Architecture.DELAYED, name="mm2"
    )


def disjoint_mm1() -> SystemConfig:
    return topology([1.0, 1.0], [(1, 1, 1.0), (2, 2, 1.0)], name="disjoint_mm1")


def symmetric_two_server() -> SystemConfig:
    return topology([2.0], [(1, 1, 1.0), (1, 2, 1.0)], name="symmetric_two_server")


def random_topology(rng: np.random.Generator, max_classes: int = 3, max_servers: int = 3) -> SystemConfig:
    """Random valid topology: every class and every server has at least one activity."""
    num_classes = int(rng.integers(1, max_classes + 1))
    num_servers = int(rng.integers(1, max_servers + 1))
    pairs = [(i, k) for i in range(num_classes) for k in range(num_servers)]
    while True:
        mask = rng.random(len(pairs)) < 0.5
        chosen = [pair for pair, keep in zip(pairs, mask) if keep]
        if {i for i, _ in chosen} == set(range(num_classes)) and {k for _, k in chosen} == set(
            range(num_servers)
        ):
            break
    return SystemConfig(
        num_classes=num_classes,
        num_servers=num_servers,
        activities=tuple(
            Activity(class_id=i, server_id=k, rate=float(rng.uniform(0.5, 3.0))) for i, k in chosen
        ),
        arrival_rates=tuple(float(x) for x in rng.uniform(0.2, 2.0, size=num_classes)),
        name="random",
    )
