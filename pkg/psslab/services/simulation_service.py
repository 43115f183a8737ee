"""Jump-chain simulation of the system as a continuous-time Markov chain.

Every holding time is exponential with the current total event rate, and the next
event is drawn proportionally to its rate. Since all clocks are memoryless this
samples the generator exactly; effort shares only enter through the rates.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from psslab.config import get_settings
from psslab.models.allocation import DualSolution
from psslab.models.errors import SimulationError
from psslab.models.metrics import MetricsAccumulator, WorkloadWeights
from psslab.models.policy import Policy
from psslab.models.state import Job, SimState
from psslab.models.system import Architecture, SystemConfig
from psslab.schemas.metrics import MetricsReport
from psslab.schemas.policy import PolicySpec, SchedulingKind
from psslab.services.policy_service import PolicyService
from psslab.utils.rng import RandomStream

logger = logging.getLogger("psslab.engine")


def _safe_ratio(numerator: np.ndarray | float, denominator: float) -> np.ndarray | float:
    if denominator <= 0:
        return numerator * 0.0
    return numerator / denominator


class SimulationService:
    """Engine entry points: event rates, single steps and complete runs."""

    @staticmethod
    def weights_from_dual(config: SystemConfig, dual: DualSolution | None) -> WorkloadWeights:
        """Workload weights (u, v) and positive-slack mask; uniform weights without a dual."""
        if dual is None:
            return WorkloadWeights.uniform(config.num_classes, config.num_servers, config.num_activities)
        tol = get_settings().classify_tolerance
        return WorkloadWeights(
            u=np.asarray(dual.u, dtype=np.float64),
            v=np.asarray(dual.v, dtype=np.float64),
            nonbasic=np.asarray(dual.d) > tol,
        )

    @staticmethod
    def start(
        config: SystemConfig,
        policy: Policy,
        seed: int,
        replication: int = 0,
        weights: WorkloadWeights | None = None,
    ) -> SimState:
        """Empty system at time zero with its own random substream."""
        settings = get_settings()
        if weights is None:
            weights = WorkloadWeights.uniform(config.num_classes, config.num_servers, config.num_activities)
        if np.any(weights.u <= 0):
            raise SimulationError("server weights u must be strictly positive")
        accumulator = MetricsAccumulator.create(
            config.num_classes, config.num_servers, config.num_activities, settings.reservoir_capacity
        )
        rng = RandomStream.for_replication(seed, replication, settings.random_block)
        return SimState.empty(config, policy, rng, accumulator, weights, np.asarray(config.arrival_rates))

    @staticmethod
    def event_rates(state: SimState) -> tuple[float, np.ndarray, np.ndarray]:
        """Total rate, arrival rate per class and completion rate per activity.

        Completion rates are mu_ik P_ik(z) in the immediate architecture and mu_ik for
        every busy (class, server) pair in the delayed one.
        """
        total = float(state.arrival_rates.sum() + state.completion_rates.sum())
        return total, state.arrival_rates.copy(), state.completion_rates.copy()

    @staticmethod
    def _integrate(state: SimState, dt: float, warmup: float, horizon: float) -> None:
        """Integrate the pre-jump state over the part of [clock, clock + dt] inside [warmup, horizon]."""
        start = max(state.clock, warmup)
        end = min(state.clock + dt, horizon)
        if end <= start:
            return
        tables = state.tables
        z = state.z.astype(np.float64)
        workloads = tables.workload_matrix @ z
        busy = tables.server_matrix @ z
        dual_queue = float(tables.class_dual @ z + state.weights.v @ state.waiting)
        state.accumulator.integrate(
            end - start,
            z,
            state.waiting.astype(np.float64),
            workloads,
            (busy == 0).astype(np.float64),
            state.shares,
            state.weights,
            dual_queue,
            float(tables.nonbasic_dual @ z),
        )

    @staticmethod
    def _refresh_server(state: SimState, k: int) -> None:
        members = state.config.activities_of_server[k]
        shares = PolicyService.server_effort(state.z, k, state.policy, state.config)
        for position, j in enumerate(members):
            state.shares[j] = shares[position]
            state.completion_rates[j] = state.config.rates[j] * shares[position]

    @staticmethod
    def _start_service(state: SimState, j: int, job: Job, counted: bool) -> None:
        k = int(state.tables.servers[j])
        state.in_service[k] = job
        state.z[j] = 1
        state.shares[j] = 1.0
        state.completion_rates[j] = state.config.rates[j]
        if counted:
            state.accumulator.routings[j] += 1
            job.routed = True

    @staticmethod
    def _idle_server_for(state: SimState, i: int) -> int | None:
        """Activity of class i at an idle eligible server, chosen by the configured rule."""
        rule = get_settings().arch2_idle_rule
        best: int | None = None
        for j in state.config.activities_of_class[i]:
            k = int(state.tables.servers[j])
            if state.in_service[k] is not None:
                continue
            if best is None:
                best = j
                continue
            k_best = int(state.tables.servers[best])
            if rule == "fastest":
                faster = state.config.rates[j] > state.config.rates[best]
                tie = state.config.rates[j] == state.config.rates[best]
                if faster or (tie and k < k_best):
                    best = j
            elif k < k_best:
                best = j
        return best

    @staticmethod
    def _arrive(state: SimState, i: int, counted: bool) -> None:
        job = Job(class_id=i, arrival_time=state.clock)
        if counted:
            state.accumulator.arrivals[i] += 1
        if state.policy.is_delayed:
            j = SimulationService._idle_server_for(state, i)
            if j is None:
                state.class_queues[i].append(job)
                state.waiting[i] += 1
            else:
                SimulationService._start_service(state, j, job, counted)
            return
        k = PolicyService.route(state.z, i, state.config, state.policy, state.rng)
        j = state.config.activity_index[(i, k)]
        state.buffers[j].append(job)
        state.z[j] += 1
        if counted:
            state.accumulator.routings[j] += 1
            job.routed = True
        SimulationService._refresh_server(state, k)

    @staticmethod
    def _complete(state: SimState, j: int, counted: bool) -> None:
        k = int(state.tables.servers[j])
        if state.policy.is_delayed:
            job = state.in_service[k]
            if job is None:
                raise SimulationError(f"completion at idle server {k + 1}")
            state.in_service[k] = None
            state.z[j] = 0
            state.shares[j] = 0.0
            state.completion_rates[j] = 0.0
            if counted:
                state.accumulator.record_departure(j, state.clock - job.arrival_time, job.routed)
            if state.policy.scheduling is SchedulingKind.MAXWEIGHT:
                i_next = PolicyService.maxweight_pick(state.waiting, k, state.config)
            else:
                i_next = PolicyService.class_priority_pick(state.waiting, k, state.policy.priority[k])
            if i_next is not None:
                next_job = state.class_queues[i_next].popleft()
                state.waiting[i_next] -= 1
                SimulationService._start_service(
                    state, state.config.activity_index[(i_next, k)], next_job, counted
                )
            return
        job = state.buffers[j].popleft()
        state.z[j] -= 1
        if counted:
            state.accumulator.record_departure(j, state.clock - job.arrival_time, job.routed)
        SimulationService._refresh_server(state, k)

    @staticmethod
    def step(state: SimState, warmup: float = 0.0, horizon: float = math.inf) -> bool:
        """Advance the chain by one jump.

        The holding interval is integrated with the pre-jump state. When the next jump
        would land past `horizon`, the clock stops at the horizon and no event fires.

        Returns:
            True if an event fired, False once the horizon is reached.
        """
        arrival_total = float(state.tables.arrival_cumsum[-1])
        completion_total = float(state.completion_rates.sum())
        total = arrival_total + completion_total
        if total <= 0:
            raise SimulationError("total event rate is zero")
        dt = state.rng.exponential(total)
        SimulationService._integrate(state, dt, warmup, horizon)
        if state.clock + dt >= horizon:
            state.clock = horizon
            return False
        state.clock += dt
        state.events += 1
        counted = state.clock >= warmup

        pick = state.rng.uniform() * total
        if pick < arrival_total:
            i = int(np.searchsorted(state.tables.arrival_cumsum, pick, side="right"))
            SimulationService._arrive(state, min(i, state.config.num_classes - 1), counted)
            return True
        cumulative = np.cumsum(state.completion_rates)
        j = min(int(np.searchsorted(cumulative, pick - arrival_total, side="right")), len(cumulative) - 1)
        while state.completion_rates[j] <= 0:
            j -= 1
        SimulationService._complete(state, j, counted)
        return True

    @staticmethod
    def simulate(
        config: SystemConfig,
        policy: Policy,
        horizon: float,
        warmup: float,
        seed: int,
        replication: int = 0,
        weights: WorkloadWeights | None = None,
    ) -> MetricsAccumulator:
        """Run one replication from an empty system and return its raw accumulator."""
        if not horizon > 0:
            raise SimulationError(f"horizon must be positive, got {horizon}")
        if not 0 <= warmup < horizon:
            raise SimulationError(f"warmup must lie in [0, horizon), got {warmup}")
        expected = Architecture.DELAYED if policy.is_delayed else Architecture.IMMEDIATE
        if config.architecture is not expected:
            raise SimulationError(
                f"policy {policy.name} needs the {expected.value} architecture, "
                f"topology {config.name} is {config.architecture.value}"
            )
        state = SimulationService.start(config, policy, seed, replication, weights)
        logger.debug(
            "Run %s/%s seed=%d rep=%d horizon=%g warmup=%g",
            config.name,
            policy.name,
            seed,
            replication,
            horizon,
            warmup,
        )
        while SimulationService.step(state, warmup, horizon):
            pass
        accumulator = state.accumulator
        accumulator.events = state.events
        accumulator.final_total = state.total_jobs()
        logger.info(
            "Finished %s/%s rep=%d: %d events, %d jobs left",
            config.name,
            policy.name,
            replication,
            state.events,
            accumulator.final_total,
        )
        return accumulator

    @staticmethod
    def summarize(
        accumulator: MetricsAccumulator,
        config: SystemConfig,
        policy_name: str,
        *,
        seed: int,
        horizon: float,
        warmup: float,
        weights: WorkloadWeights,
        replication: int = 0,
    ) -> MetricsReport:
        """Turn raw integrals and counts into time averages and fractions."""
        acc = accumulator
        elapsed = acc.elapsed

        def avg(value: np.ndarray | float) -> np.ndarray | float:
            return _safe_ratio(value, elapsed)

        routing_fraction = np.zeros(config.num_activities)
        for group in config.activities_of_class:
            total = float(sum(acc.routings[j] for j in group))
            for j in group:
                routing_fraction[j] = _safe_ratio(float(acc.routings[j]), total)

        weighted_mean = float(avg(acc.weighted_workload_integral))
        sojourn_mean = float(_safe_ratio(acc.sojourn_sum, acc.sojourn_count))
        sojourn_variance = 0.0
        if acc.sojourn_count > 1:
            sojourn_variance = max(
                (acc.sojourn_sq_sum - acc.sojourn_count * sojourn_mean**2) / (acc.sojourn_count - 1), 0.0
            )
        return MetricsReport(
            topology=config.name,
            policy=policy_name,
            architecture=config.architecture,
            seed=seed,
            replication=replication,
            runs=acc.runs,
            horizon=horizon,
            warmup=warmup,
            elapsed=elapsed,
            events=acc.events,
            arrival_rates=list(config.arrival_rates),
            u=weights.u.tolist(),
            v=weights.v.tolist(),
            mean_queue=np.asarray(avg(acc.queue_integral)).tolist(),
            mean_class_waiting=np.asarray(avg(acc.class_waiting_integral)).tolist(),
            mean_total_queue=float(avg(acc.total_queue_integral)),
            final_total_queue=acc.final_total / max(acc.runs, 1),
            mean_workload=np.asarray(avg(acc.workload_integral)).tolist(),
            mean_weighted_workload=weighted_mean,
            second_moment_weighted_workload=float(avg(acc.weighted_workload_sq_integral)),
            mean_gap=float(avg(acc.gap_integral)),
            mean_gap_sq=float(avg(acc.gap_sq_integral)),
            mean_top=float(avg(acc.top_integral)),
            mean_orthogonal=float(avg(acc.orthogonal_integral)),
            idle_fraction=np.asarray(avg(acc.idle_integral)).tolist(),
            idle_weighted_workload=np.asarray(avg(acc.idle_weighted_integral)).tolist(),
            effort_fraction=np.asarray(avg(acc.effort_integral)).tolist(),
            routing_fraction=routing_fraction.tolist(),
            mean_dual_queue=float(avg(acc.dual_queue_integral)),
            mean_nonbasic_dual_queue=float(avg(acc.nonbasic_dual_queue_integral)),
            arrivals=acc.arrivals.tolist(),
            routings=acc.routings.tolist(),
            departures=acc.departures.tolist(),
            sojourn_mean=sojourn_mean,
            sojourn_variance=sojourn_variance,
            sojourn_count=acc.sojourn_count,
            weighted_samples=list(zip(acc.reservoir.values, acc.reservoir.weights)),
        )

    @staticmethod
    def run(
        config: SystemConfig,
        policy: Policy | PolicySpec,
        horizon: float,
        warmup: float,
        seed: int,
        *,
        replication: int = 0,
        dual: DualSolution | None = None,
    ) -> MetricsReport:
        """Simulate from an empty system and report statistics over [warmup, horizon].

        Deterministic in (config, policy, horizon, warmup, seed, replication).

        Raises:
            SimulationError: horizon <= 0, warmup outside [0, horizon), or a policy
                that does not match the topology's architecture.
        """
        if isinstance(policy, PolicySpec):
            policy = PolicyService.resolve(policy, config)
        weights = SimulationService.weights_from_dual(config, dual)
        accumulator = SimulationService.simulate(config, policy, horizon, warmup, seed, replication, weights)
        return SimulationService.summarize(
            accumulator,
            config,
            policy.name,
            seed=seed,
            horizon=horizon,
            warmup=warmup,
            weights=weights,
            replication=replication,
        )

    @staticmethod
    def run_arch2(
        config: SystemConfig,
        scheduling: Policy | PolicySpec,
        horizon: float,
        warmup: float,
        seed: int,
        *,
        replication: int = 0,
        dual: DualSolution | None = None,
    ) -> MetricsReport:
        """Delayed-architecture run: class queues, idle servers pick by MaxWeight or class priority.

        An arrival finding an idle eligible server starts service at once; the rule
        choosing among several idle servers comes from `simulation.arch2_idle_rule`.
        """
        if config.architecture is not Architecture.DELAYED:
            raise SimulationError(f"topology {config.name} is not in the delayed architecture")
        return SimulationService.run(
            config, scheduling, horizon, warmup, seed, replication=replication, dual=dual
        )
