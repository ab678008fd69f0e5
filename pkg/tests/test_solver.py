import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from polybeam.solver import (
    INFEASIBLE,
    OPTIMAL,
    ComplexProblem,
    ConicProblem,
    ProblemError,
    dump_problem,
    lift_complex,
    load_problem,
    solve,
    unlift,
)


def _lagrange_toy(cones=()):
    return ConicProblem.from_least_squares(np.eye(2), [0.5, 0.0], [[1.0, 1.0]], [1.0], cones)


def test_unconstrained_identity():
    b = np.array([0.3, -2.0, 7.5])
    res = solve(ConicProblem.from_least_squares(np.eye(3), b))
    assert res.status == OPTIMAL
    assert_allclose(res.x, b, atol=1e-12)
    assert abs(res.objective) < 1e-20


def test_equality_only_lagrange():
    # closed form: x = b + c (1 - c.b) / c.c with c = [1, 1]
    res = solve(_lagrange_toy())
    assert_allclose(res.x, [0.75, 0.25], atol=1e-8)
    assert res.eq_residual <= 1e-12


def test_inactive_ball_does_not_move_optimum():
    res = solve(_lagrange_toy(((np.eye(2), 2.0),)))
    assert res.status == OPTIMAL
    assert_allclose(res.x, [0.75, 0.25], atol=1e-8)


def test_active_ball_matches_circle_search():
    # radius 0.75 < |[0.75, 0.25]| so the ball is active; the feasible set is a
    # chord of the line x1 + x2 = 1, brute-forced here
    rho = 0.75
    res = solve(_lagrange_toy(((np.eye(2), rho),)))
    assert res.status == OPTIMAL
    half = np.sqrt(rho**2 - 0.5)
    t = np.linspace(-half, half, 2_000_001)
    x1 = 0.5 + t / np.sqrt(2)
    x2 = 0.5 - t / np.sqrt(2)
    obj = (x1 - 0.5) ** 2 + x2**2
    k = np.argmin(obj)
    assert_allclose(res.x, [x1[k], x2[k]], atol=1e-6)
    assert_allclose(np.linalg.norm(res.x), rho, atol=1e-8)
    assert res.objective <= obj[k] + 1e-9  # duality gap tolerance


def test_incompatible_ball_is_infeasible():
    # the line x1 + x2 = 1 has minimum norm 1/sqrt(2) > 0.6
    res = solve(_lagrange_toy(((np.eye(2), 0.6),)))
    assert res.status == INFEASIBLE
    assert res.violated_cone == 0
    assert "1.1785" in res.message


def test_dependent_equalities_rejected():
    p = ConicProblem.from_least_squares(np.eye(3), np.ones(3), [[1, 2, 3], [2, 4, 6]], [1, 2])
    with pytest.raises(ProblemError, match="dependent"):
        solve(p)


def test_problem_validation():
    with pytest.raises(ProblemError):
        ConicProblem(np.eye(2), np.ones(3))
    with pytest.raises(ProblemError):
        ConicProblem(np.eye(2), np.ones(2), cones=((np.eye(2), 0.0),))
    with pytest.raises(ProblemError):
        ConicProblem(np.eye(2), [np.nan, 0])


def _random_problem(rng, n, p, k):
    A = rng.standard_normal((n + 2, n))
    b = rng.standard_normal(n + 2) * 3
    C = rng.standard_normal((p, n))
    xf = rng.standard_normal(n) * 0.3
    cones = [(np.eye(n), np.linalg.norm(xf) * rng.uniform(1.05, 1.6))]
    for _ in range(k - 1):
        F = rng.standard_normal((rng.integers(1, n + 1), n))
        cones.append((F, np.linalg.norm(F @ xf) * rng.uniform(1.05, 1.6)))
    return ConicProblem.from_least_squares(A, b, C, C @ xf, tuple(cones)), xf


def _grid_oracle(problem, levels=48, pts=None):
    """Zooming grid search over the affine feasible set (convex problem)."""
    n = problem.n
    p = problem.C.shape[0]
    if p:
        _, _, vt = np.linalg.svd(problem.C)
        Z = vt[p:].T
        base = np.linalg.lstsq(problem.C, problem.d, rcond=None)[0]
    else:
        Z, base = np.eye(n), np.zeros(n)
    m = Z.shape[1]
    pts = pts or {1: 2001, 2: 121, 3: 31, 4: 15}[m]
    # the first cone is a ball around the origin, so this box holds the feasible set
    center = np.zeros(m)
    half = problem.cones[0][1] + np.linalg.norm(base)
    best = None
    for _ in range(levels):
        axes = [np.linspace(c - half, c + half, pts) for c in center]
        Y = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, m)
        X = base + Y @ Z.T
        ok = np.ones(len(X), bool)
        for F, rho in problem.cones:
            ok &= np.linalg.norm(X @ F.T, axis=1) <= rho
        obj = np.einsum("ij,jk,ik->i", X, problem.H, X) - 2 * X @ problem.f + problem.r
        obj[~ok] = np.inf
        i = np.argmin(obj)
        if best is None or obj[i] < best:
            best = obj[i]
            center = Y[i]
        half *= 0.6
    return best


@pytest.mark.parametrize("seed", range(40))
def test_random_problems_against_grid_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    p = int(rng.integers(max(0, n - 4), n))
    k = int(rng.integers(1, 4))
    prob, _ = _random_problem(rng, n, p, k)
    res = solve(prob)
    assert res.status == OPTIMAL
    assert res.eq_residual <= 1e-8 * (1 + np.max(np.abs(prob.d), initial=0))
    for F, rho in prob.cones:
        assert np.linalg.norm(F @ res.x) <= rho * (1 + 1e-8)
    ref = _grid_oracle(prob)
    # the grid can only find feasible points, so it never beats the optimum
    assert res.objective <= ref + 1e-8 * max(1.0, abs(ref))
    assert ref - res.objective <= 1e-4 * max(1.0, abs(ref))


def _feasible_directions(prob, rng, count):
    if prob.C.shape[0]:
        _, _, vt = np.linalg.svd(prob.C)
        Z = vt[prob.C.shape[0]:].T
    else:
        Z = np.eye(prob.n)
    dirs = rng.standard_normal((count, Z.shape[1])) @ Z.T
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


@pytest.mark.parametrize("seed", range(8))
def test_no_feasible_descent_direction(seed):
    rng = np.random.default_rng(100 + seed)
    prob, _ = _random_problem(rng, 6, 2, 2)
    res = solve(prob)
    assert res.status == OPTIMAL
    for d in _feasible_directions(prob, rng, 100):
        y = res.x + 1e-3 * d
        if np.all(prob.cone_violations(y) <= 0):
            assert prob.objective(y) >= res.objective - 1e-9


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 100.0))
def test_argmin_invariant_to_objective_scale(seed, c):
    rng = np.random.default_rng(seed)
    prob, _ = _random_problem(rng, 4, 1, 2)
    scaled = ConicProblem(c * prob.H, c * prob.f, c * prob.r, prob.C, prob.d, prob.cones)
    x1 = solve(prob).x
    x2 = solve(scaled).x
    assert_allclose(x1, x2, atol=1e-6 * (1 + np.linalg.norm(x1)))


def test_bitwise_deterministic():
    prob, _ = _random_problem(np.random.default_rng(7), 6, 2, 3)
    a, b = solve(prob), solve(prob)
    assert_array_equal(a.x, b.x)
    assert a.iterations == b.iterations


def test_lift_dimensions_and_isometry(rng):
    n = 5
    H = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    cp = ComplexProblem(H.conj().T @ H, rng.standard_normal(n) + 0j, 0.0,
                        np.ones((1, n), complex), [1.0], ((np.eye(n), 3.0),))
    lp = lift_complex(cp)
    assert lp.n == 2 * n
    assert lp.C.shape == (2, 2 * n)
    assert_allclose(lp.d, [1, 0])
    w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x = np.concatenate([w.real, w.imag])
    assert_allclose(np.linalg.norm(x), np.linalg.norm(w))
    assert_allclose(lp.objective(x), cp.objective(w), rtol=1e-12)
    assert_allclose(unlift(x), w)


def test_lift_complex_equality_and_solution(rng):
    n = 4
    A = rng.standard_normal((7, n)) + 1j * rng.standard_normal((7, n))
    b = rng.standard_normal(7) + 1j * rng.standard_normal(7)
    a = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    cp = ComplexProblem.from_least_squares(A, b, a[None, :], [1.0], ((np.eye(n), 2.0),))
    res = solve(lift_complex(cp))
    assert res.status == OPTIMAL
    w = unlift(res.x)
    # plain (non-conjugated) product
    assert_allclose(a @ w, 1.0, atol=1e-9)
    # without the ball the KKT system gives the reference answer when inactive
    free = solve(lift_complex(ComplexProblem.from_least_squares(A, b, a[None, :], [1.0])))
    if np.linalg.norm(unlift(free.x)) < 2.0:
        assert_allclose(w, unlift(free.x), atol=1e-7)
    else:
        assert_allclose(np.linalg.norm(w), 2.0, atol=1e-8)


@pytest.mark.parametrize("seed", range(5))
def test_real_input_gives_zero_imaginary_block(seed):
    rng = np.random.default_rng(seed)
    prob, _ = _random_problem(rng, 4, 1, 2)
    cp = ComplexProblem(prob.H.astype(complex), prob.f.astype(complex), prob.r,
                        prob.C.astype(complex), prob.d, prob.cones)
    real = solve(prob)
    lifted = solve(lift_complex(cp))
    assert_allclose(lifted.x[4:], 0, atol=1e-7)
    assert_allclose(lifted.x[:4], real.x, atol=1e-7)


def test_dump_load_roundtrip(tmp_path):
    prob, _ = _random_problem(np.random.default_rng(3), 5, 2, 2)
    dump_problem(prob, tmp_path / "p.json")
    back = load_problem(tmp_path / "p.json")
    assert_array_equal(back.H, prob.H)
    assert_array_equal(back.d, prob.d)
    assert len(back.cones) == 2
    assert_array_equal(solve(back).x, solve(prob).x)
