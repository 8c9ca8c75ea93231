import numpy as np
import pytest
from hypothesis import given, seed, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import minimize

from conftest import random_instance
from rdars.model import relaxed_objective
from rdars.subsolvers import (
    BallProblem,
    BoxQP,
    build_mm_scratch,
    eig_split,
    largest_eigenvalue,
    mm_phase_step,
    project_ball,
    project_ball_nonneg,
    project_box,
    solve_ball_trace_inverse,
    solve_box_qp,
)

vectors = arrays(np.float64, st.integers(1, 12), elements=st.floats(-5, 5))


def in_ball(v, n, tol=1e-9):
    return np.linalg.norm(2 * v - 1) <= np.sqrt(n) * (1 + tol)


@given(vectors)
def test_projections_land_in_their_sets(y):
    n = y.size
    assert np.all((project_box(y) >= 0) & (project_box(y) <= 1))
    assert in_ball(project_ball(y, n), n)
    p = project_ball_nonneg(y, n)
    assert in_ball(p, n) and np.all(p >= 0)


@given(vectors)
def test_projections_are_idempotent(y):
    n = y.size
    for proj in (lambda z: project_ball(z, n), lambda z: project_ball_nonneg(z, n)):
        p = proj(y)
        np.testing.assert_allclose(proj(p), p, atol=1e-12)


@seed(7)
@given(arrays(np.float64, 6, elements=st.floats(-4, 4)))
def test_nonneg_ball_projection_matches_generic_solver(y):
    n = y.size
    cons = [
        {"type": "ineq", "fun": lambda v: n - np.sum((2 * v - 1) ** 2)},
        {"type": "ineq", "fun": lambda v: v},
    ]
    ref = minimize(lambda v: np.sum((v - y) ** 2), np.full(n, 0.5), constraints=cons, method="SLSQP", options={"ftol": 1e-14, "maxiter": 500})
    p = project_ball_nonneg(y, n)
    # the exact projection is at least as close as the (slightly inexact) reference
    assert np.sum((p - y) ** 2) <= ref.fun + 1e-7


def test_binary_points_are_ball_fixed_points():
    x = np.array([1.0, 0.0, 0.0, 1.0, 0.0])
    np.testing.assert_array_equal(project_ball(x, 5), x)
    np.testing.assert_array_equal(project_ball_nonneg(x, 5), x)


def test_largest_eigenvalue():
    rng = np.random.default_rng(0)
    b = rng.standard_normal((6, 6))
    q = b @ b.T
    assert largest_eigenvalue(q, rtol=1e-12, max_iter=10_000) == pytest.approx(np.linalg.eigvalsh(q)[-1], rel=1e-6)
    assert largest_eigenvalue(np.zeros((3, 3))) == 0.0


def _brute_box_qp(q, c):
    res = min(
        (minimize(lambda x: x @ q @ x + c @ x, x0, bounds=[(0, 1)] * c.size, method="L-BFGS-B", options={"ftol": 1e-15, "gtol": 1e-12}) for x0 in np.eye(c.size)),
        key=lambda r: r.fun,
    )
    return res.fun


@seed(5)
@given(st.integers(0, 10_000))
def test_box_qp_matches_reference(s):
    rng = np.random.default_rng(s)
    n = 6
    b = rng.standard_normal((n, n))
    q = b @ b.T
    c = 3 * rng.standard_normal(n)
    res = solve_box_qp(BoxQP(q, c), np.full(n, 0.5), tol=1e-10, max_iter=20_000)
    assert res.converged
    assert np.all((res.x >= 0) & (res.x <= 1))
    assert res.value <= _brute_box_qp(q, c) + 1e-8


def test_box_qp_example_stays_in_box():
    res = solve_box_qp(BoxQP(np.eye(3), np.array([-4.0, 1.0, 0.0])), np.zeros(3))
    np.testing.assert_allclose(res.x, [1.0, 0.0, 0.0], atol=1e-8)


def test_box_qp_rejects_asymmetric():
    with pytest.raises(ValueError):
        BoxQP(np.array([[1.0, 2.0], [0.0, 1.0]]), np.zeros(2))


def test_ball_solver_quadratic():
    # min ||v - t||^2 over the ball is the projection of t
    t = np.array([3.0, -2.0, 0.4, 1.5])
    prob = BallProblem(lambda v: (float(np.sum((v - t) ** 2)), 2 * (v - t)), 4)
    res = solve_ball_trace_inverse(prob, np.full(4, 0.5), tol=1e-14)
    np.testing.assert_allclose(res.x, project_ball(t, 4), atol=1e-6)


def test_ball_solver_trace_inverse_is_descent():
    dims, ch, theta, sel = random_instance(2)
    x = sel.mask.astype(float)

    def obj(v):
        f = relaxed_objective(ch, x, v, theta)
        eps = 1e-7
        g = np.array([(relaxed_objective(ch, x, v + eps * e, theta) - f) / eps for e in np.eye(v.size)])
        return f, g

    prob = BallProblem(obj, 8, nonneg=True)
    res = solve_ball_trace_inverse(prob, x, tol=1e-10)
    assert res.value <= relaxed_objective(ch, x, x, theta) + 1e-12
    assert in_ball(res.x, 8) and np.all(res.x >= 0)


@given(st.integers(0, 10_000))
def test_eig_split(s):
    rng = np.random.default_rng(s)
    b = rng.standard_normal((5, 5))
    m = b + b.T
    pos, neg = eig_split(m)
    np.testing.assert_allclose(pos + neg, m, atol=1e-10)
    assert np.linalg.eigvalsh(pos).min() >= -1e-10
    assert np.linalg.eigvalsh(neg).max() <= 1e-10


@seed(1)
@given(st.integers(0, 10_000))
def test_mm_step_descends_relaxed_objective(s):
    _, ch, theta, _ = random_instance(s)
    rng = np.random.default_rng(s + 1)
    x = rng.random(8)
    v = project_ball_nonneg(rng.random(8), 8)
    f = relaxed_objective(ch, x, v, theta)
    for _ in range(5):
        theta = mm_phase_step(build_mm_scratch(ch, theta, 1.0 - x, v), theta)
        f_new = relaxed_objective(ch, x, v, theta)
        assert f_new <= f + 1e-10
        f = f_new
    np.testing.assert_allclose(np.abs(theta), 1.0)


def test_mm_step_fixed_point_without_reflection():
    # with every element connected the phases do not matter; the step must not crash
    _, ch, theta, _ = random_instance(4)
    ones = np.ones(8)
    out = mm_phase_step(build_mm_scratch(ch, theta, np.zeros(8), ones), theta)
    np.testing.assert_allclose(np.abs(out), 1.0)
