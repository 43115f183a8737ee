"""Static allocation LP, its dual, activity classification and heavy-traffic limits."""

from __future__ import annotations

import logging

import networkx as nx
import numpy as np

from common.versioning import get_report_schema_version
from psslab.config import get_settings
from psslab.models.allocation import (
    ActivityRecord,
    ActivityReport,
    ActivityStatus,
    AnalysisResult,
    DualSolution,
    HeavyTrafficCheck,
    LimitPrediction,
    PrimalSolution,
)
from psslab.models.errors import (
    ConsistencyViolation,
    HeavyTrafficViolated,
    InfeasibleError,
    LPSolverError,
)
from psslab.models.system import SystemConfig, SystemMatrices
from psslab.schemas.report import ActivityRecordOut, AnalysisReport, EdgeOut, PredictionOut
from psslab.services.topology_service import TopologyService
from psslab.utils.simplex import LPStatus, linprog_simplex

logger = logging.getLogger("psslab.allocation")


def _endpoints(matrices: SystemMatrices) -> tuple[np.ndarray, np.ndarray]:
    """Class and server of every activity column."""
    return np.argmax(matrices.C, axis=0), np.argmax(matrices.A, axis=0)


def _label(classes: np.ndarray, servers: np.ndarray, j: int) -> str:
    return f"({classes[j] + 1},{servers[j] + 1})"


def _tolerances(classify_tol: float | None, residual_tol: float | None) -> tuple[float, float]:
    settings = get_settings()
    return (
        settings.classify_tolerance if classify_tol is None else classify_tol,
        settings.residual_tolerance if residual_tol is None else residual_tol,
    )


class AllocationService:
    """LP analysis of a topology under the relaxed heavy-traffic and CRP conditions."""

    @staticmethod
    def solve_primal(matrices: SystemMatrices, arrival_rates: np.ndarray) -> PrimalSolution:
        """Solve min rho s.t. Rx = lambda, Ax <= rho e, x, rho >= 0.

        Raises:
            InfeasibleError: no x >= 0 with Rx = lambda.
        """
        I, K, J = matrices.shape
        lam = np.asarray(arrival_rates, dtype=np.float64)
        c = np.zeros(J + 1)
        c[-1] = 1.0
        A_ub = np.hstack([matrices.A, -np.ones((K, 1))])
        A_eq = np.hstack([matrices.R, np.zeros((I, 1))])
        result = linprog_simplex(
            c, A_ub, np.zeros(K), A_eq, lam, maxiter=get_settings().max_iterations
        )
        if result.status is LPStatus.INFEASIBLE:
            raise InfeasibleError("no nonnegative x satisfies Rx = lambda")
        if not result.success or result.x is None:
            raise LPSolverError(f"static allocation LP failed: {result.message}")
        if result.degenerate_pivots:
            logger.debug("Static allocation LP took %d degenerate pivots", result.degenerate_pivots)
        return PrimalSolution(x=result.x[:J], rho=float(result.x[J]))

    @staticmethod
    def check_relaxed_heavy_traffic(
        matrices: SystemMatrices, arrival_rates: np.ndarray
    ) -> HeavyTrafficCheck:
        """Find x* >= 0 with Rx* = lambda and Ax* = e, or report the best min-utilization.

        On failure, `max_min_utilization` is max t s.t. Rx = lambda, t e <= Ax <= max(rho*, 1) e.
        """
        I, K, J = matrices.shape
        lam = np.asarray(arrival_rates, dtype=np.float64)
        settings = get_settings()
        feasibility = linprog_simplex(
            np.zeros(J),
            A_eq=np.vstack([matrices.R, matrices.A]),
            b_eq=np.concatenate([lam, np.ones(K)]),
            maxiter=settings.max_iterations,
        )
        if feasibility.success and feasibility.x is not None:
            return HeavyTrafficCheck(witness=feasibility.x, max_min_utilization=1.0)

        rho = AllocationService.solve_primal(matrices, lam).rho
        cap = max(rho, 1.0)
        # Variables (x, t): maximize t with t <= (Ax)_k <= cap for every server
        c = np.zeros(J + 1)
        c[-1] = -1.0
        A_ub = np.vstack([
            np.hstack([-matrices.A, np.ones((K, 1))]),
            np.hstack([matrices.A, np.zeros((K, 1))]),
        ])
        b_ub = np.concatenate([np.zeros(K), np.full(K, cap)])
        A_eq = np.hstack([matrices.R, np.zeros((I, 1))])
        result = linprog_simplex(c, A_ub, b_ub, A_eq, lam, maxiter=settings.max_iterations)
        if not result.success or result.x is None:
            raise LPSolverError(f"min-utilization LP failed: {result.message}")
        best = float(result.x[J])
        logger.info("Relaxed heavy traffic fails: best min-utilization %.6g", best)
        return HeavyTrafficCheck(witness=None, max_min_utilization=best)

    @staticmethod
    def max_over_optimal(matrices: SystemMatrices, arrival_rates: np.ndarray, j: int) -> float:
        """max x_j over {x >= 0, Rx = lambda, Ax = e}.

        Raises:
            HeavyTrafficViolated: the polytope is empty.
        """
        I, K, J = matrices.shape
        c = np.zeros(J)
        c[j] = -1.0
        result = linprog_simplex(
            c,
            A_eq=np.vstack([matrices.R, matrices.A]),
            b_eq=np.concatenate([np.asarray(arrival_rates, dtype=np.float64), np.ones(K)]),
            maxiter=get_settings().max_iterations,
        )
        if result.status is LPStatus.INFEASIBLE:
            raise HeavyTrafficViolated("no x >= 0 with Rx = lambda and Ax = e")
        if not result.success or result.x is None:
            raise LPSolverError(f"max-over-optimal LP failed for activity {j}: {result.message}")
        return float(result.x[j])

    @staticmethod
    def can_coexist(
        matrices: SystemMatrices,
        arrival_rates: np.ndarray,
        j: int,
        j_other: int,
        tol: float | None = None,
    ) -> bool:
        """True iff some optimal x* has both x_j > tol and x_j' > tol.

        Solved as one LP: maximize t with x_j >= t and x_j' >= t over the optimal polytope.
        """
        classes, servers = _endpoints(matrices)
        if classes[j] != classes[j_other] or servers[j] == servers[j_other]:
            raise ValueError(
                f"activities {_label(classes, servers, j)} and {_label(classes, servers, j_other)} "
                "must share a class and use different servers"
            )
        classify_tol, _ = _tolerances(tol, None)
        I, K, J = matrices.shape
        c = np.zeros(J + 1)
        c[-1] = -1.0
        A_ub = np.zeros((2, J + 1))
        A_ub[0, j] = -1.0
        A_ub[1, j_other] = -1.0
        A_ub[:, -1] = 1.0
        A_eq = np.hstack([np.vstack([matrices.R, matrices.A]), np.zeros((I + K, 1))])
        b_eq = np.concatenate([np.asarray(arrival_rates, dtype=np.float64), np.ones(K)])
        result = linprog_simplex(c, A_ub, np.zeros(2), A_eq, b_eq, maxiter=get_settings().max_iterations)
        if result.status is LPStatus.INFEASIBLE:
            raise HeavyTrafficViolated("no x >= 0 with Rx = lambda and Ax = e")
        if not result.success or result.x is None:
            raise LPSolverError(f"coexistence LP failed: {result.message}")
        return float(result.x[J]) > classify_tol

    @staticmethod
    def build_activity_report(
        matrices: SystemMatrices,
        arrival_rates: np.ndarray,
        dual: DualSolution | None = None,
    ) -> ActivityReport:
        """Classify every activity and attach its dual slack d_j.

        Raises:
            ConsistencyViolation: an activity with d_j > tol is positive in some optimal x.
        """
        classify_tol, residual_tol = _tolerances(None, None)
        classes, servers = _endpoints(matrices)
        if dual is None:
            dual = AllocationService.dual_by_lp(matrices, arrival_rates)
        records = []
        for j in range(matrices.shape[2]):
            max_x = AllocationService.max_over_optimal(matrices, arrival_rates, j)
            status = (
                ActivityStatus.BASIC_CAPABLE if max_x > classify_tol else ActivityStatus.STRICTLY_NON_BASIC
            )
            d_j = float(dual.d[j])
            if d_j > residual_tol and status is ActivityStatus.BASIC_CAPABLE:
                raise ConsistencyViolation(
                    f"complementary slackness fails for {_label(classes, servers, j)}: "
                    f"d={d_j:.3g} but max x={max_x:.3g}"
                )
            records.append(
                ActivityRecord(
                    index=j,
                    label=_label(classes, servers, j),
                    max_x=max_x,
                    status=status,
                    d=d_j,
                )
            )
        return ActivityReport(records=tuple(records))

    @staticmethod
    def communication_graph(
        matrices: SystemMatrices,
        arrival_rates: np.ndarray,
        report: ActivityReport | None = None,
    ) -> nx.Graph:
        """Graph on servers with an edge (k, k') iff some class lets them communicate directly.

        Each edge carries the sorted list of certifying classes in attribute "classes".
        Pairs involving a strictly non-basic activity are skipped when a report is given.
        """
        classes, servers = _endpoints(matrices)
        I, K, J = matrices.shape
        graph = nx.Graph()
        graph.add_nodes_from(range(K))
        for i in range(I):
            members = [j for j in range(J) if classes[j] == i]
            if report is not None:
                members = [j for j in members if report.is_basic_capable(j)]
            for a, j in enumerate(members):
                for j_other in members[a + 1:]:
                    if not AllocationService.can_coexist(matrices, arrival_rates, j, j_other):
                        continue
                    k, k_other = int(servers[j]), int(servers[j_other])
                    if graph.has_edge(k, k_other):
                        graph.edges[k, k_other]["classes"] = sorted(
                            set(graph.edges[k, k_other]["classes"]) | {i}
                        )
                    else:
                        graph.add_edge(k, k_other, classes=[i])
        logger.debug("Communication graph edges: %s", list(graph.edges(data="classes")))
        return graph

    @staticmethod
    def crp_check(graph: nx.Graph) -> bool:
        """Relaxed CRP: the communication graph is connected (a single server always is)."""
        return graph.number_of_nodes() > 0 and nx.is_connected(graph)

    @staticmethod
    def _dual_slacks(matrices: SystemMatrices, v: np.ndarray, u: np.ndarray) -> np.ndarray:
        classes, servers = _endpoints(matrices)
        return u[servers] - matrices.mu * v[classes]

    @staticmethod
    def dual_by_lp(matrices: SystemMatrices, arrival_rates: np.ndarray) -> DualSolution:
        """Solve max v.lambda s.t. mu_ik v_i <= u_k for every activity, sum u <= 1, u >= 0.

        v is free and split as v+ - v-.
        """
        I, K, J = matrices.shape
        lam = np.asarray(arrival_rates, dtype=np.float64)
        classes, servers = _endpoints(matrices)
        # Variables: v+ (I), v- (I), u (K)
        c = np.concatenate([-lam, lam, np.zeros(K)])
        A_ub = np.zeros((J + 1, 2 * I + K))
        for j in range(J):
            A_ub[j, classes[j]] = matrices.mu[j]
            A_ub[j, I + classes[j]] = -matrices.mu[j]
            A_ub[j, 2 * I + servers[j]] = -1.0
        A_ub[J, 2 * I:] = 1.0
        b_ub = np.zeros(J + 1)
        b_ub[J] = 1.0
        result = linprog_simplex(c, A_ub, b_ub, maxiter=get_settings().max_iterations)
        if not result.success or result.x is None:
            raise LPSolverError(f"dual LP failed: {result.message}")
        v = result.x[:I] - result.x[I:2 * I]
        u = result.x[2 * I:]
        logger.debug("Dual LP objective %.12g", float(v @ lam))
        return DualSolution(v=v, u=u, d=AllocationService._dual_slacks(matrices, v, u))

    @staticmethod
    def dual_by_propagation(
        matrices: SystemMatrices,
        arrival_rates: np.ndarray,
        report: ActivityReport,
        graph: nx.Graph,
        root: int = 0,
    ) -> DualSolution:
        """Recover (v, u) by propagating u along a spanning tree of the communication graph.

        Starting from u_root = 1, each tree edge (k, k') certified by class i gives
        v_i = u_k / mu_ik and u_k' = v_i mu_ik'. After normalizing sum u = 1, every
        class takes v_i from its first basic-capable activity, and every unused
        basic equation and dual constraint is checked.

        Raises:
            ConsistencyViolation: graph disconnected, a class without basic activity,
                or an unused equation fails.
        """
        _, residual_tol = _tolerances(None, None)
        classes, servers = _endpoints(matrices)
        I, K, J = matrices.shape
        if not AllocationService.crp_check(graph):
            raise ConsistencyViolation("communication graph is not connected")

        mu = matrices.mu
        u = np.zeros(K)
        u[root] = 1.0
        for k, k_next in nx.bfs_edges(graph, root, sort_neighbors=sorted):
            i = min(graph.edges[k, k_next]["classes"])
            j = int(np.nonzero((classes == i) & (servers == k))[0][0])
            j_next = int(np.nonzero((classes == i) & (servers == k_next))[0][0])
            v_i = u[k] / mu[j]
            u[k_next] = v_i * mu[j_next]
        u = u / u.sum()

        v = np.zeros(I)
        for i in range(I):
            basic = [j for j in range(J) if classes[j] == i and report.is_basic_capable(j)]
            if not basic:
                raise ConsistencyViolation(f"class {i + 1} has no basic-capable activity")
            j = basic[0]
            v[i] = u[servers[j]] / mu[j]

        d = AllocationService._dual_slacks(matrices, v, u)
        failures = []
        for j in range(J):
            scale = max(1.0, abs(u[servers[j]]))
            if report.is_basic_capable(j) and abs(d[j]) > residual_tol * scale:
                failures.append(f"basic equation {_label(classes, servers, j)} off by {d[j]:.3g}")
            elif d[j] < -residual_tol * scale:
                failures.append(f"dual constraint {_label(classes, servers, j)} violated by {-d[j]:.3g}")
        if failures:
            raise ConsistencyViolation("; ".join(failures))
        return DualSolution(v=v, u=u, d=d)

    @staticmethod
    def predict_limit(arrival_rates: np.ndarray, dual: DualSolution) -> LimitPrediction:
        """Exponential heavy-traffic limit: m = sum lambda_i v_i^2, X mean = m / sum u_k^2.

        Raises:
            ConsistencyViolation: the dual fails v.lambda = 1, sum u = 1, positivity
                or d >= 0.
        """
        lam = np.asarray(arrival_rates, dtype=np.float64)
        problems = dual.violations(lam, get_settings().residual_tolerance)
        if problems:
            raise ConsistencyViolation("dual solution rejected: " + "; ".join(problems))
        m =float(np.sum(lam * dual.v ** 2))
        x_mean = m / float(np.sum(dual.u ** 2))
        return LimitPrediction(
            m=m,
            x_mean=x_mean,
            per_server_mean=dual.u * x_mean,
            total_weighted_mean=m,
            queue_weighted_mean=m,
        )

    @staticmethod
    def analyze(config: SystemConfig) -> AnalysisResult:
        """Run the full LP analysis of a topology at its nominal arrival rates."""
        matrices = TopologyService.build_matrices(config)
        lam = np.asarray(config.arrival_rates, dtype=np.float64)
        primal = AllocationService.solve_primal(matrices, lam)
        heavy_traffic = AllocationService.check_relaxed_heavy_traffic(matrices, lam)
        if not heavy_traffic.holds:
            return AnalysisResult(primal=primal, heavy_traffic=heavy_traffic)

        dual_lp = AllocationService.dual_by_lp(matrices, lam)
        report = AllocationService.build_activity_report(matrices, lam, dual_lp)
        graph = AllocationService.communication_graph(matrices, lam, report)
        crp = AllocationService.crp_check(graph)
        edges = tuple(
            (min(k, k2), max(k, k2), tuple(data["classes"])) for k, k2, data in sorted(graph.edges(data=True))
        )
        if not crp:
            logger.warning("Relaxed CRP fails for %s: communication graph is disconnected", config.name)
            return AnalysisResult(
                primal=primal,
                heavy_traffic=heavy_traffic,
                activity_report=report,
                edges=edges,
                crp=False,
                dual_by_lp=dual_lp,
            )

        dual_prop = AllocationService.dual_by_propagation(matrices, lam, report, graph)
        gap = float(np.max(np.abs(np.concatenate([dual_prop.u - dual_lp.u, dual_prop.v - dual_lp.v]))))
        if gap > 1e-9:
            logger.warning("Propagated and LP duals differ by %.3g", gap)
        return AnalysisResult(
            primal=primal,
            heavy_traffic=heavy_traffic,
            activity_report=report,
            edges=edges,
            crp=True,
            dual_by_lp=dual_lp,
            dual_by_propagation=dual_prop,
            prediction=AllocationService.predict_limit(lam, dual_prop),
        )

    @staticmethod
    def to_report(config: SystemConfig, result: AnalysisResult) -> AnalysisReport:
        """Serializable view of an analysis, with 1-based labels."""
        report = AnalysisReport(
            topology=config.name,
            schema_version=get_report_schema_version(),
            rho_star=result.primal.rho,
            x_optimal=result.primal.x.tolist(),
            heavy_traffic=result.heavy_traffic.holds,
            max_min_utilization=result.heavy_traffic.max_min_utilization,
            x_witness=None if result.heavy_traffic.witness is None else result.heavy_traffic.witness.tolist(),
            crp=result.crp,
            edges=[
                EdgeOut(servers=(k + 1, k2 + 1), classes=[i + 1 for i in classes])
                for k, k2, classes in result.edges
            ],
        )
        if result.activity_report is not None:
            report.activity_report = [
                ActivityRecordOut(label=r.label, max_x=r.max_x, status=r.status, d=r.d)
                for r in result.activity_report.records
            ]
            report.non_basic = [config.labels[j] for j in result.activity_report.non_basic]
        dual = result.dual
        if dual is not None:
            report.u = dual.u.tolist()
            report.v = dual.v.tolist()
            report.d = dual.d.tolist()
            report.dual_source = "propagation" if result.dual_by_propagation is not None else "lp"
        if result.dual_by_propagation is not None and result.dual_by_lp is not None:
            report.dual_agreement = float(
                np.max(
                    np.abs(
                        np.concatenate([
                            result.dual_by_propagation.u - result.dual_by_lp.u,
                            result.dual_by_propagation.v - result.dual_by_lp.v,
                        ])
                    )
                )
            )
        if result.prediction is not None:
            report.prediction = AllocationService.prediction_out(result.prediction)
        return report

    @staticmethod
    def prediction_out(prediction: LimitPrediction) -> PredictionOut:
        return PredictionOut(
            m=prediction.m,
            x_mean=prediction.x_mean,
            per_server_mean=np.asarray(prediction.per_server_mean).tolist(),
            total_weighted_mean=prediction.total_weighted_mean,
            queue_weighted_mean=prediction.queue_weighted_mean,
        )
