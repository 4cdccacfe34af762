import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fdisac.oracle import pg_qcqp
from fdisac.qcqp import (InfeasibleError, QcqpProblem, find_root_monotone, solve_ball_qp,
                         solve_qcqp)

from conftest import crandn, random_qcqp


def test_root_examples():
    assert find_root_monotone(lambda x: x - 1, (0, 2)) == pytest.approx(1.0, abs=1e-12)
    r = find_root_monotone(lambda x: x * x - 2, (0, 2), dg=lambda x: 2 * x)
    assert r == pytest.approx(np.sqrt(2), abs=1e-12)
    with pytest.raises(ValueError, match="g\\(lo\\)"):
        find_root_monotone(lambda x: x + 1, (0, 2))


def test_multiplier_root_for_shrink_example():
    # Q = I, q = (2, 0), ||x||^2 <= 1: x(s) = q/(1+s), g(s) = 4/(1+s)^2 - 1.
    assert find_root_monotone(lambda s: 4 / (1 + s) ** 2 - 1, (0, 10)) == pytest.approx(1.0, abs=1e-10)


def test_case_one_origin():
    p = QcqpProblem.ball(np.eye(2), np.zeros(2), 1.0)
    sol = solve_qcqp(p, full_output=True)
    assert sol.case == 1
    np.testing.assert_allclose(sol.x, 0)


def test_case_two_shrink():
    p = QcqpProblem.ball(np.eye(2), np.array([2.0, 0.0]), 1.0)
    sol = solve_qcqp(p, full_output=True)
    assert sol.case == 2
    np.testing.assert_allclose(sol.x, [1, 0], atol=1e-10)
    assert sol.multiplier == pytest.approx(1.0, abs=1e-10)
    np.testing.assert_allclose(pg_qcqp(p), [1, 0], atol=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 8), st.booleans())
def test_matches_oracle_and_kkt(seed, n, active):
    rng = np.random.default_rng(seed)
    p = random_qcqp(rng, n, active)
    sol = solve_qcqp(p, full_output=True)
    x = sol.x
    assert p.constraint(x) <= 1e-8 * p.constraint_scale()
    ref = pg_qcqp(p)
    assert p.objective(x) <= p.objective(ref) + 1e-6 * max(1.0, abs(p.objective(ref)))
    s = sol.multiplier
    grad = p.q_matrix @ x - p.q_vector + s * (p.cons_matrix @ x - p.cons_vector)
    scale = np.linalg.norm(p.q_vector) + s * np.linalg.norm(p.cons_vector) + 1.0
    assert np.linalg.norm(grad) <= 1e-6 * scale
    if sol.case == 2:
        assert abs(p.constraint(x)) <= 1e-8 * p.constraint_scale()


def test_affine_constraint(rng):
    n = 4
    Q = np.eye(n) * 2
    qc = crandn(rng, n)
    p = QcqpProblem(Q, -10 * qc, np.zeros((n, n)), qc, 1.0)
    assert p.constraint(np.linalg.solve(Q, p.q_vector)) > 0
    sol = solve_qcqp(p, full_output=True)
    assert abs(p.constraint(sol.x)) <= 1e-10
    resid = Q @ sol.x - p.q_vector - sol.multiplier * qc
    assert np.linalg.norm(resid) <= 1e-8 * np.linalg.norm(p.q_vector)


def test_infeasible_and_bad_input():
    n = 2
    with pytest.raises(InfeasibleError):
        solve_qcqp(QcqpProblem(np.eye(n), np.ones(n), np.zeros((n, n)), np.zeros(n), 1.0))
    with pytest.raises(InfeasibleError):
        solve_qcqp(QcqpProblem(np.eye(n), np.ones(n), np.diag([1.0, 0.0]), np.zeros(n), 1.0))
    with pytest.raises(ValueError):
        solve_qcqp(QcqpProblem(-np.eye(n), np.ones(n), np.eye(n), np.zeros(n), -1.0))
    with pytest.raises(ValueError):
        QcqpProblem(np.eye(2), np.ones(3), np.eye(2), np.zeros(2), 0.0)


def test_ball_examples():
    np.testing.assert_allclose(solve_ball_qp(np.eye(3), np.zeros(3), 1.0), 0)
    sol = solve_ball_qp(np.eye(3), np.array([3.0, 0, 0]), 1.0, full_output=True)
    np.testing.assert_allclose(sol.x, [1, 0, 0], atol=1e-10)
    assert sol.multiplier == pytest.approx(2.0, abs=1e-9)
    with pytest.raises(ValueError):
        solve_ball_qp(np.eye(2), np.ones(2), 0.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 8), st.floats(0.01, 10.0))
def test_ball_matches_general_solver(seed, n, r2):
    rng = np.random.default_rng(seed)
    A = crandn(rng, n, n)
    D = A @ A.conj().T + 0.05 * np.eye(n)
    d = 3 * crandn(rng, n)
    x = solve_ball_qp(D, d, r2)
    y = solve_qcqp(QcqpProblem.ball(D, d, r2))
    assert np.vdot(x, x).real <= r2 * (1 + 1e-12)
    p = QcqpProblem.ball(D, d, r2)
    assert p.objective(x) == pytest.approx(p.objective(y), rel=1e-8, abs=1e-10)
