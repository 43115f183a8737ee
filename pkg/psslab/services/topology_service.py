"""Service for building, validating and scaling system topologies."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from psslab.models.errors import TopologyError
from psslab.models.system import Activity, SystemConfig, SystemMatrices
from psslab.schemas.topology import ActivityEntry, TopologyFile

logger = logging.getLogger("psslab.topology")


class TopologyService:
    """Topology construction and the matrices every other service relies on."""

    @staticmethod
    def build_matrices(config: SystemConfig) -> SystemMatrices:
        """Build constituency C, resource-consumption A and output R = C diag(mu).

        Column j corresponds to activity j in declaration order.
        """
        I, K, J = config.num_classes, config.num_servers, config.num_activities
        C = np.zeros((I, J))
        A = np.zeros((K, J))
        for j, activity in enumerate(config.activities):
            C[activity.class_id, j] = 1.0
            A[activity.server_id, j] = 1.0
        R = C * config.rates[np.newaxis, :]
        return SystemMatrices(C=C, A=A, R=R)

    @staticmethod
    def validate_config(config: SystemConfig) -> list[str]:
        """Return every violated topology invariant; empty list iff valid."""
        violations: list[str] = []
        if config.num_classes < 1:
            violations.append("num_classes must be positive")
        if config.num_servers < 1:
            violations.append("num_servers must be positive")
        if len(config.arrival_rates) != config.num_classes:
            violations.append(
                f"arrival_rates has {len(config.arrival_rates)} entries, expected {config.num_classes}"
            )
        for i, rate in enumerate(config.arrival_rates):
            if not rate > 0:
                violations.append(f"arrival rate must be positive (class {i + 1}: {rate})")

        seen: set[tuple[int, int]] = set()
        classes_with_activity: set[int] = set()
        servers_with_activity: set[int] = set()
        for activity in config.activities:
            label = activity.label
            if not 0 <= activity.class_id < config.num_classes:
                violations.append(f"class id out of range in activity {label}")
            if not 0 <= activity.server_id < config.num_servers:
                violations.append(f"server id out of range in activity {label}")
            if not activity.rate > 0:
                violations.append(f"service rate must be positive in activity {label}")
            key = (activity.class_id, activity.server_id)
            if key in seen:
                violations.append(f"duplicate activity {label}")
            seen.add(key)
            classes_with_activity.add(activity.class_id)
            servers_with_activity.add(activity.server_id)

        for i in range(max(config.num_classes, 0)):
            if i not in classes_with_activity:
                violations.append(f"class {i + 1} has no activity")
        for k in range(max(config.num_servers, 0)):
            if k not in servers_with_activity:
                violations.append(f"server {k + 1} has no activity")
        return violations

    @staticmethod
    def scale_arrivals(config: SystemConfig, r: float) -> SystemConfig:
        """Return a copy with lambda_i^(r) = lambda_i (1 - r); other fields unchanged."""
        if not 0.0 < r < 1.0:
            raise TopologyError(f"heavy-traffic parameter r must lie in (0, 1), got {r}")
        return config.with_arrival_rates(tuple(rate * (1.0 - r) for rate in config.arrival_rates))

    @staticmethod
    def scale_to_load(config: SystemConfig, load: float) -> SystemConfig:
        """Return a copy with every arrival rate multiplied by `load` in (0, 1)."""
        return TopologyService.scale_arrivals(config, 1.0 - load)

    @staticmethod
    def from_schema(topology: TopologyFile) -> SystemConfig:
        """Convert a parsed topology file (1-based ids) into a SystemConfig."""
        return SystemConfig(
            num_classes=topology.num_classes,
            num_servers=topology.num_servers,
            activities=tuple(
                Activity(class_id=a.class_id - 1, server_id=a.server - 1, rate=float(a.rate))
                for a in topology.activities
            ),
            arrival_rates=tuple(float(x) for x in topology.arrival_rates),
            architecture=topology.architecture,
            name=topology.name or "system",
        )

    @staticmethod
    def to_schema(config: SystemConfig) -> TopologyFile:
        """Convert a SystemConfig back to its file representation."""
        return TopologyFile(
            name=config.name,
            num_classes=config.num_classes,
            num_servers=config.num_servers,
            arrival_rates=list(config.arrival_rates),
            activities=[
                ActivityEntry(class_id=a.class_id + 1, server=a.server_id + 1, rate=a.rate)
                for a in config.activities
            ],
            architecture=config.architecture,
        )

    @staticmethod
    def parse_topology(text: str, source: str = "<string>") -> SystemConfig:
        """Parse and validate topology JSON.

        Raises:
            TopologyError: on malformed JSON (with line/column), schema errors,
                or violated invariants (all of them, in `violations`).
        """
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise TopologyError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        try:
            topology = TopologyFile.model_validate(raw)
        except ValidationError as exc:
            details = [
                f"{'.'.join(str(part) for part in err['loc'])}: {err['msg']}" for err in exc.errors()
            ]
            raise TopologyError(f"{source}: invalid topology", details) from exc

        config = TopologyService.from_schema(topology)
        violations = TopologyService.validate_config(config)
        if violations:
            raise TopologyError(f"{source}: topology violates {len(violations)} invariant(s)", violations)
        logger.debug(
            "Loaded topology %s: I=%d K=%d J=%d",
            config.name,
            config.num_classes,
            config.num_servers,
            config.num_activities,
        )
        return config

    @staticmethod
    def load_topology(path: Path) -> SystemConfig:
        """Read a topology file from disk."""
        if not path.exists():
            raise TopologyError(f"Topology file '{path}' does not exist")
        return TopologyService.parse_topology(path.read_text(encoding="utf-8"), source=str(path))
