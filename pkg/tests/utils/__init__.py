"""Shared helpers for unit tests."""

from __future__ import annotations

from .lp_oracle import oracle_dual_objective, oracle_rho_star
from .reports import make_point, make_verification_report
from .topologies import (
    TOPOLOGY_DIR,
    EXPERIMENT_DIR,
    disjoint_mm1,
    mm1,
    mm2,
    n_model,
    random_topology,
    symmetric_two_server,
    topology,
    w_model,
    x_model,
)

__all__ = [
    "EXPERIMENT_DIR",
    "TOPOLOGY_DIR",
    "disjoint_mm1",
    "make_point",
    "make_verification_report",
    "mm1",
    "mm2",
    "n_model",
    "oracle_dual_objective",
    "oracle_rho_star",
    "random_topology",
    "symmetric_two_server",
    "topology",
    "w_model",
    "x_model",
]
