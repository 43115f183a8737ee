"""Tests for the dense two-phase simplex."""

import numpy as np
import pytest

from psslab.utils.simplex import LPStatus, linprog_simplex


class TestLinprogSimplex:
    """Small problems with known optima."""

    def test_textbook_maximization(self) -> None:
        # max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18
        result = linprog_simplex(
            np.array([-3.0, -5.0]),
            A_ub=np.array([[1.0, 0.0], [0.0, 2.0], [3.0, 2.0]]),
            b_ub=np.array([4.0, 12.0, 18.0]),
        )

        assert result.status is LPStatus.OPTIMAL
        np.testing.assert_allclose(result.x, [2.0, 6.0], atol=1e-12)
        assert result.fun == pytest.approx(-36.0)

    def test_equality_constraints(self) -> None:
        # min x + 2y s.t. x + y = 1
        result = linprog_simplex(np.array([1.0, 2.0]), A_eq=np.array([[1.0, 1.0]]), b_eq=np.array([1.0]))

        assert result.success
        np.testing.assert_allclose(result.x, [1.0, 0.0], atol=1e-12)

    def test_negative_right_hand_side(self) -> None:
        # min x s.t. -x <= -2
        result = linprog_simplex(np.array([1.0]), A_ub=np.array([[-1.0]]), b_ub=np.array([-2.0]))

        assert result.x[0] == pytest.approx(2.0)

    def test_infeasible(self) -> None:
        result = linprog_simplex(
            np.array([1.0, 1.0]),
            A_eq=np.array([[1.0, 1.0], [1.0, 1.0]]),
            b_eq=np.array([1.0, 2.0]),
        )

        assert result.status is LPStatus.INFEASIBLE
        assert result.x is None

    def test_unbounded(self) -> None:
        result = linprog_simplex(np.array([-1.0, 0.0]), A_ub=np.array([[0.0, 1.0]]), b_ub=np.array([1.0]))

        assert result.status is LPStatus.UNBOUNDED

    def test_redundant_equalities(self) -> None:
        result = linprog_simplex(
            np.array([1.0, 1.0]),
            A_eq=np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
            b_eq=np.array([1.0, 1.0, 2.0]),
        )

        assert result.success
        np.testing.assert_allclose(result.x, [1.0, 2.0], atol=1e-12)

    def test_degenerate_problem_terminates(self) -> None:
        # Classic cycling example for the largest-coefficient rule
        c = np.array([-0.75, 150.0, -0.02, 6.0])
        A_ub = np.array([
            [0.25, -60.0, -0.04, 9.0],
            [0.5, -90.0, -0.02, 3.0],
            [0.0, 0.0, 1.0, 0.0],
        ])
        b_ub = np.array([0.0, 0.0, 1.0])

        result = linprog_simplex(c, A_ub=A_ub, b_ub=b_ub)

        assert result.success
        assert result.fun == pytest.approx(-0.05)

    def test_iteration_limit(self) -> None:
        result = linprog_simplex(
            np.array([-3.0, -5.0]),
            A_ub=np.array([[1.0, 0.0], [0.0, 2.0], [3.0, 2.0]]),
            b_ub=np.array([4.0, 12.0, 18.0]),
            maxiter=1,
        )

        assert result.status is LPStatus.ITERATION_LIMIT
