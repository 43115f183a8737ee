"""Routing and scheduling decisions as pure functions of the queue state."""

from __future__ import annotations

import logging

import numpy as np

from psslab.models.errors import ExperimentError
from psslab.models.policy import Policy
from psslab.models.system import Architecture, SystemConfig
from psslab.schemas.policy import PolicySpec, RoutingKind, SchedulingKind
from psslab.utils.rng import RandomStream

logger = logging.getLogger("psslab.policy")


def _pick_smallest(scores: list[tuple[float, int]], rng: RandomStream | None) -> int:
    """Server with the smallest score; smallest server id on ties unless rng is given."""
    best = min(score for score, _ in scores)
    tied = sorted(k for score, k in scores if score == best)
    if rng is not None and len(tied) > 1:
        return tied[rng.choice(len(tied))]
    return tied[0]


class PolicyService:
    """Routing, effort allocation and server-side job selection."""

    @staticmethod
    def workload(z: np.ndarray, k: int, config: SystemConfig) -> float:
        """W_k(z) = sum over the buffers of server k of m_ik z_ik."""
        members = config.activities_of_server[k]
        return float(sum(config.mean_service_times[j] * z[j] for j in members))

    @staticmethod
    def workloads(z: np.ndarray, config: SystemConfig) -> np.ndarray:
        """All W_k(z) at once, length K."""
        servers = np.array([a.server_id for a in config.activities], dtype=np.int64)
        return np.bincount(servers, weights=config.mean_service_times * z, minlength=config.num_servers)

    @staticmethod
    def wwta_route(
        z: np.ndarray, i: int, config: SystemConfig, rng: RandomStream | None = None
    ) -> int:
        """Server k in K(i) minimizing m_ik W_k(z).

        Args:
            z: Buffer contents per activity.
            i: 0-based class of the arriving job.
            config: System topology.
            rng: When given, ties are broken uniformly at random instead of by smallest index.

        Returns:
            0-based server id.
        """
        scores = []
        for j in config.activities_of_class[i]:
            k = config.activities[j].server_id
            scores.append((config.mean_service_times[j] * PolicyService.workload(z, k, config), k))
        return _pick_smallest(scores, rng)

    @staticmethod
    def jsq_route(
        z: np.ndarray, i: int, config: SystemConfig, rng: RandomStream | None = None
    ) -> int:
        """Server k in K(i) with the fewest jobs across its buffers."""
        scores = []
        for j in config.activities_of_class[i]:
            k = config.activities[j].server_id
            total = float(sum(z[j2] for j2 in config.activities_of_server[k]))
            scores.append((total, k))
        return _pick_smallest(scores, rng)

    @staticmethod
    def route(z: np.ndarray, i: int, config: SystemConfig, policy: Policy, rng: RandomStream | None) -> int:
        tie_rng = rng if policy.random_tie_break else None
        if policy.routing is RoutingKind.JSQ:
            return PolicyService.jsq_route(z, i, config, tie_rng)
        return PolicyService.wwta_route(z, i, config, tie_rng)

    @staticmethod
    def server_effort(z: np.ndarray, k: int, policy: Policy, config: SystemConfig) -> np.ndarray:
        """Effort shares P_ik of server k, aligned with `config.activities_of_server[k]`.

        HLPPS: c_j z_j / sum c z with 0/0 = 0. SBP: indicator of the highest-priority
        nonempty buffer. Shares sum to 1 iff the server has work.
        """
        members = config.activities_of_server[k]
        shares = np.zeros(len(members))
        if policy.scheduling is SchedulingKind.SBP:
            position = {j: p for p, j in enumerate(members)}
            for j in policy.priority[k]:
                if z[j] > 0:
                    shares[position[j]] = 1.0
                    break
            return shares
        weighted = np.array([policy.weights[j] * z[j] for j in members], dtype=np.float64)
        total = weighted.sum()
        if total > 0:
            shares = weighted / total
        return shares

    @staticmethod
    def effort_shares(z: np.ndarray, k: int, policy: Policy, config: SystemConfig) -> dict[int, float]:
        """Mapping 0-based class i -> P_ik for server k."""
        shares = PolicyService.server_effort(z, k, policy, config)
        return {
            config.activities[j].class_id: float(share)
            for j, share in zip(config.activities_of_server[k], shares)
        }

    @staticmethod
    def maxweight_pick(class_queues: np.ndarray, k: int, config: SystemConfig) -> int | None:
        """Class maximizing mu_ik z_i among nonempty eligible classes; None means idle."""
        best: int | None = None
        best_weight = 0.0
        for j in config.activities_of_server[k]:
            i = config.activities[j].class_id
            if class_queues[i] <= 0:
                continue
            weight = config.rates[j] * class_queues[i]
            if best is None or weight > best_weight or (weight == best_weight and i < best):
                best, best_weight = i, weight
        return best

    @staticmethod
    def class_priority_pick(
        class_queues: np.ndarray, k: int, order: tuple[int, ...]
    ) -> int | None:
        """First nonempty class in server k's ranking; None means idle."""
        for i in order:
            if class_queues[i] > 0:
                return i
        return None

    @staticmethod
    def default_order(config: SystemConfig) -> tuple[tuple[int, ...], ...]:
        """Per server, classes by shortest mean processing time first, ties by class index."""
        orders = []
        for k in range(config.num_servers):
            members = config.activities_of_server[k]
            ranked = sorted(
                members, key=lambda j: (config.mean_service_times[j], config.activities[j].class_id)
            )
            orders.append(tuple(config.activities[j].class_id for j in ranked))
        return tuple(orders)

    @staticmethod
    def _parse_order(
        order: dict[int, list[int]] | None, config: SystemConfig
    ) -> tuple[tuple[int, ...], ...]:
        """Convert a 1-based per-server ranking; each ranking must be total on the server's classes."""
        if order is None:
            return PolicyService.default_order(config)
        unknown = set(order) - set(range(1, config.num_servers + 1))
        if unknown:
            raise ExperimentError(f"priority order names unknown servers {sorted(unknown)}")
        result = []
        for k in range(config.num_servers):
            eligible = sorted(config.activities[j].class_id for j in config.activities_of_server[k])
            ranking = [i - 1 for i in order.get(k + 1, [])]
            if sorted(ranking) != eligible:
                raise ExperimentError(
                    f"priority order of server {k + 1} must rank exactly classes "
                    f"{[i + 1 for i in eligible]}, got {[i + 1 for i in ranking]}"
                )
            result.append(tuple(ranking))
        return tuple(result)

    @staticmethod
    def resolve(spec: PolicySpec, config: SystemConfig) -> Policy:
        """Bind a policy specification to a topology.

        Raises:
            ExperimentError: weights of the wrong length, rankings that are not total,
                or a scheduler that does not match the topology's architecture.
        """
        scheduling = SchedulingKind(spec.scheduling.type)
        delayed = config.architecture is Architecture.DELAYED
        if spec.is_delayed != delayed:
            raise ExperimentError(
                f"policy {spec.name} does not fit the {config.architecture.value} "
                f"architecture of {config.name}"
            )
        weights = np.ones(config.num_activities)
        priority: tuple[tuple[int, ...], ...] = ()
        if spec.scheduling.type == "hlpps" and spec.scheduling.weights is not None:
            if len(spec.scheduling.weights) != config.num_activities:
                raise ExperimentError(
                    f"HLPPS weights need {config.num_activities} entries, got {len(spec.scheduling.weights)}"
                )
            weights = np.asarray(spec.scheduling.weights, dtype=np.float64)
        elif spec.scheduling.type == "sbp":
            class_order = PolicyService._parse_order(spec.scheduling.order, config)
            priority = tuple(
                tuple(config.activity_index[(i, k)] for i in ranking) for k, ranking in enumerate(class_order)
            )
        elif spec.scheduling.type == "class_priority":
            priority = PolicyService._parse_order(spec.scheduling.order, config)
        logger.debug("Resolved policy %s on %s: priority=%s", spec.name, config.name, priority)
        return Policy(
            name=spec.name,
            routing=spec.routing,
            scheduling=scheduling,
            weights=weights,
            priority=priority,
            random_tie_break=spec.random_tie_break,
        )
