"""Dense two-phase primal simplex with Bland's anti-cycling rule.

Solves

    minimize    c @ x
    subject to  A_ub @ x <= b_ub
                A_eq @ x == b_eq
                x >= 0

on a full numpy tableau. Problems in the lab have a few dozen variables, so
the tableau is kept dense and every pivot touches every row.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
import logging

import numpy as np

logger = logging.getLogger("psslab.allocation")


class LPStatus(str, Enum):
    """Exit status of the simplex."""

    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True)
class LPResult:
    """Simplex outcome. `x` is None unless the status is OPTIMAL."""

    status: LPStatus
    x: np.ndarray | None
    fun: float
    nit: int
    degenerate_pivots: int
    message: str = ""

    @property
    def success(self) -> bool:
        return self.status is LPStatus.OPTIMAL


def _pivot(T: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    """Pivot the tableau in place on (row, col)."""
    basis[row] = col
    T[row] = T[row] / T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] = T[r] - T[r, col] * T[row]


def _entering_column(cost_row: np.ndarray, allowed: int, tol: float) -> int | None:
    """Bland: smallest-index column with a negative reduced cost."""
    candidates = np.nonzero(cost_row[:allowed] < -tol)[0]
    if candidates.size == 0:
        return None
    return int(candidates[0])


def _leaving_row(T: np.ndarray, basis: np.ndarray, n_rows: int, col: int, tol: float) -> int | None:
    """Minimum-ratio row; ties go to the smallest basic variable index (Bland)."""
    column = T[:n_rows, col]
    eligible = np.nonzero(column > tol)[0]
    if eligible.size == 0:
        return None
    ratios = T[eligible, -1] / column[eligible]
    best = ratios.min()
    ties = eligible[ratios <= best + tol * max(1.0, abs(best))]
    return int(ties[np.argmin(basis[ties])])


def _run_phase(
    T: np.ndarray,
    basis: np.ndarray,
    n_rows: int,
    allowed: int,
    cost_row_index: int,
    *,
    tol: float,
    maxiter: int,
) -> tuple[LPStatus, int, int]:
    """Pivot until optimal, unbounded or out of iterations."""
    nit = 0
    degenerate = 0
    stalled = 0
    stall_reported = False
    while True:
        col = _entering_column(T[cost_row_index], allowed, tol)
        if col is None:
            return LPStatus.OPTIMAL, nit, degenerate
        row = _leaving_row(T, basis, n_rows, col, tol)
        if row is None:
            return LPStatus.UNBOUNDED, nit, degenerate
        if nit >= maxiter:
            return LPStatus.ITERATION_LIMIT, nit, degenerate
        if abs(T[row, -1]) <= tol:
            degenerate += 1
            stalled += 1
            if stalled > n_rows + allowed and not stall_reported:
                logger.warning(
                    "Simplex stalled on %d consecutive degenerate pivots; Bland's rule prevents cycling",
                    stalled,
                )
                stall_reported = True
        else:
            stalled = 0
        _pivot(T, basis, row, col)
        nit += 1


def linprog_simplex(
    c: np.ndarray,
    A_ub: np.ndarray | None = None,
    b_ub: np.ndarray | None = None,
    A_eq: np.ndarray | None = None,
    b_eq: np.ndarray | None = None,
    *,
    tol: float = 1e-9,
    feasibility_tol: float = 1e-8,
    maxiter: int = 5000,
) -> LPResult:
    """Minimize c @ x over {A_ub x <= b_ub, A_eq x == b_eq, x >= 0}.

    Args:
        c: Cost vector of length n.
        A_ub: Inequality matrix (m_ub x n) or None.
        b_ub: Inequality right-hand side or None.
        A_eq: Equality matrix (m_eq x n) or None.
        b_eq: Equality right-hand side or None.
        tol: Pivot and reduced-cost tolerance.
        feasibility_tol: Phase-1 objective above which the problem is infeasible.
        maxiter: Pivot cap per phase.

    Returns:
        LPResult with the optimal x when status is OPTIMAL.
    """
    c = np.asarray(c, dtype=np.float64)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=np.float64))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=np.float64).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=np.float64))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=np.float64).ravel()

    m_ub = A_ub.shape[0]
    m_eq = A_eq.shape[0]
    m = m_ub + m_eq
    n_struct = n + m_ub  # structural columns plus one slack per inequality

    A = np.zeros((m, n_struct))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])

    negative = b < 0
    A[negative] *= -1.0
    b[negative] *= -1.0

    # Rows: m constraints, phase-2 cost, phase-1 cost. Columns: structural, artificial, rhs.
    T = np.zeros((m + 2, n_struct + m + 1))
    T[:m, :n_struct] = A
    T[:m, n_struct:n_struct + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = c
    T[m + 1, :n_struct] = -A.sum(axis=0)
    T[m + 1, -1] = -b.sum()
    basis = np.arange(n_struct, n_struct + m)

    status, nit1, degenerate1 = _run_phase(
        T, basis, m, n_struct + m, m + 1, tol=tol, maxiter=maxiter
    )
    if status is LPStatus.ITERATION_LIMIT:
        return LPResult(status, None, float("nan"), nit1, degenerate1, "phase 1 iteration limit")

    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    if -T[m + 1, -1] > feasibility_tol * scale:
        logger.debug("Simplex phase 1 residual %.3e: infeasible", -T[m + 1, -1])
        return LPResult(LPStatus.INFEASIBLE, None, float("nan"), nit1, degenerate1, "no feasible point")

    # Drive remaining artificials out of the basis; rows that cannot pivot are redundant.
    keep_rows: list[int] = []
    for row in range(m):
        if basis[row] >= n_struct:
            candidates = np.nonzero(np.abs(T[row, :n_struct]) > tol)[0]
            if candidates.size == 0:
                continue
            _pivot(T, basis, row, int(candidates[0]))
            nit1 += 1
        keep_rows.append(row)

    phase2 = np.vstack([T[keep_rows][:, list(range(n_struct)) + [T.shape[1] - 1]],
                        T[m][list(range(n_struct)) + [T.shape[1] - 1]]])
    basis2 = basis[keep_rows].copy()
    rows2 = len(keep_rows)

    status, nit2, degenerate2 = _run_phase(
        phase2, basis2, rows2, n_struct, rows2, tol=tol, maxiter=maxiter
    )
    nit = nit1 + nit2
    degenerate = degenerate1 + degenerate2
    if status is not LPStatus.OPTIMAL:
        return LPResult(status, None, float("nan"), nit, degenerate, f"phase 2 {status.value}")

    solution = np.zeros(n_struct)
    solution[basis2] = phase2[:rows2, -1]
    x = np.clip(solution[:n], 0.0, None)
    fun = float(c @ x)
    logger.debug("Simplex optimal: fun=%.12g nit=%d degenerate=%d", fun, nit, degenerate)
    return LPResult(LPStatus.OPTIMAL, x, fun, nit, degenerate)
