"""LP solver tests against a brute-force vertex enumeration oracle."""

import itertools

import numpy as np
import pytest

from proxops.solvers import (
    DEFAULT_TOLERANCES,
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    LpProblem,
    check_kkt,
    solve_lp,
)

FEAS_TOL = 1e-9


def enumerate_vertices(c, a_in, b_in, lb, ub):
    """Best objective over all basic feasible points of a box-bounded LP.

    Every vertex of {A x <= b, lb <= x <= ub} with all bounds finite has at
    least n - m coordinates at a bound; enumerate row subsets and free
    coordinate subsets, batch the bound patterns, and keep the feasible
    minimum. Exponential, so only for small test instances.
    """
    n = len(c)
    m = a_in.shape[0]
    best = np.inf
    best_x = None
    for k in range(min(m, n) + 1):
        for rows in itertools.combinations(range(m), k):
            for free in itertools.combinations(range(n), k):
                fixed = [j for j in range(n) if j not in free]
                free = list(free)
                nf = len(fixed)
                pats = ((np.arange(2**nf)[:, None] >> np.arange(nf)) & 1).astype(bool)
                xs = np.empty((pats.shape[0], n))
                xs[:, fixed] = np.where(pats, ub[fixed], lb[fixed])
                if k:
                    asq = a_in[np.ix_(list(rows), free)]
                    if abs(np.linalg.det(asq)) < 1e-12:
                        continue
                    rhs = b_in[list(rows)][None, :] - xs[:, fixed] @ a_in[
                        np.ix_(list(rows), fixed)
                    ].T
                    xs[:, free] = np.linalg.solve(asq, rhs.T).T
                ok = (
                    np.all(xs >= lb - FEAS_TOL, axis=1)
                    & np.all(xs <= ub + FEAS_TOL, axis=1)
                    & np.all(xs @ a_in.T <= b_in + FEAS_TOL, axis=1)
                )
                if np.any(ok):
                    vals = xs[ok] @ c
                    i = int(np.argmin(vals))
                    if vals[i] < best:
                        best = float(vals[i])
                        best_x = xs[ok][i]
    return best, best_x


def assert_certified(problem, result, tol=1e-6):
    """Re-check the returned certificate through the independent path."""
    assert result.status == OPTIMAL
    grad = problem.c
    report = check_kkt(
        result.x, grad, problem.lb, problem.ub,
        c_eq=problem.a_eq @ result.x - problem.b_eq if problem.a_eq.size else None,
        jac_eq=problem.a_eq if problem.a_eq.size else None,
        c_in=problem.a_in @ result.x - problem.b_in if problem.a_in.size else None,
        jac_in=problem.a_in if problem.a_in.size else None,
        duals_eq=result.duals_eq, duals_in=result.duals_in,
        duals_lb=result.duals_lb, duals_ub=result.duals_ub,
    )
    assert report.satisfied(tol), report.as_dict()


def test_min_sum_with_floor():
    # min x+y s.t. x+y >= 1, x,y >= 0
    problem = LpProblem(
        c=[1.0, 1.0], a_in=[[-1.0, -1.0]], b_in=[-1.0], lb=[0.0, 0.0],
    )
    res = solve_lp(problem)
    assert res.status == OPTIMAL
    assert res.objective == pytest.approx(1.0, abs=1e-9)
    assert_certified(problem, res)


def test_push_to_upper_bound():
    # min -x s.t. x <= 3, x >= 0
    problem = LpProblem(c=[-1.0], a_in=[[1.0]], b_in=[3.0], lb=[0.0])
    res = solve_lp(problem)
    assert res.status == OPTIMAL
    assert res.x[0] == pytest.approx(3.0, abs=1e-9)
    assert res.objective == pytest.approx(-3.0, abs=1e-9)


def test_random_lps_match_vertex_enumeration():
    rng = np.random.default_rng(20240915)
    for trial in range(6):
        n, m = 10, 3
        c = rng.normal(size=n)
        a_in = rng.normal(size=(m, n))
        lb = -1.0 - rng.uniform(size=n)
        ub = 1.0 + rng.uniform(size=n)
        interior = lb + (ub - lb) * rng.uniform(0.2, 0.8, size=n)
        b_in = a_in @ interior + rng.uniform(0.1, 1.0, size=m)
        oracle_obj, _ = enumerate_vertices(c, a_in, b_in, lb, ub)

        problem = LpProblem(c=c, a_in=a_in, b_in=b_in, lb=lb, ub=ub)
        res = solve_lp(problem)
        assert res.status == OPTIMAL, f"trial {trial}: {res.message}"
        assert res.objective == pytest.approx(oracle_obj, abs=1e-8), f"trial {trial}"
        assert_certified(problem, res)


def test_small_random_lps_batch():
    # denser sweep at a smaller size, the acceptance-level conformance check
    rng = np.random.default_rng(7)
    n, m = 4, 3
    for trial in range(50):
        c = rng.normal(size=n)
        a_in = rng.normal(size=(m, n))
        lb = -1.0 - rng.uniform(size=n)
        ub = 1.0 + rng.uniform(size=n)
        interior = lb + (ub - lb) * rng.uniform(0.2, 0.8, size=n)
        b_in = a_in @ interior + rng.uniform(0.1, 1.0, size=m)
        oracle_obj, _ = enumerate_vertices(c, a_in, b_in, lb, ub)

        problem = LpProblem(c=c, a_in=a_in, b_in=b_in, lb=lb, ub=ub)
        res = solve_lp(problem)
        assert res.status == OPTIMAL, f"trial {trial}: {res.message}"
        assert res.objective == pytest.approx(oracle_obj, abs=1e-8), f"trial {trial}"
        assert_certified(problem, res)


def test_equality_constrained():
    # min x + 2y + 3z s.t. x+y+z = 2, each in [0, 1.5]: load x first, then y
    problem = LpProblem(
        c=[1.0, 2.0, 3.0],
        a_eq=[[1.0, 1.0, 1.0]], b_eq=[2.0],
        lb=[0.0, 0.0, 0.0], ub=[1.5, 1.5, 1.5],
    )
    res = solve_lp(problem)
    assert res.status == OPTIMAL
    assert res.objective == pytest.approx(2.5, abs=1e-9)
    np.testing.assert_allclose(res.x, [1.5, 0.5, 0.0], atol=1e-9)
    assert_certified(problem, res)


def test_free_variable():
    # unbounded-below variable pinned by a row
    problem = LpProblem(c=[1.0], a_in=[[-1.0]], b_in=[5.0])
    res = solve_lp(problem)
    assert res.status == OPTIMAL
    assert res.x[0] == pytest.approx(-5.0, abs=1e-9)


def test_infeasible_bounds_vs_row():
    problem = LpProblem(c=[1.0], a_in=[[1.0]], b_in=[1.0], lb=[2.0])
    res = solve_lp(problem)
    assert res.status == INFEASIBLE


def test_infeasible_equalities():
    problem = LpProblem(
        c=[1.0, 1.0],
        a_eq=[[1.0, 1.0], [1.0, 1.0]], b_eq=[1.0, 2.0],
    )
    res = solve_lp(problem)
    assert res.status == INFEASIBLE


def test_unbounded_box_only():
    problem = LpProblem(c=[-1.0], lb=[0.0])
    res = solve_lp(problem)
    assert res.status == UNBOUNDED


def test_unbounded_with_rows():
    # min -x - y s.t. x - y <= 1, both >= 0: ray along x = y
    problem = LpProblem(
        c=[-1.0, -1.0], a_in=[[1.0, -1.0]], b_in=[1.0], lb=[0.0, 0.0],
    )
    res = solve_lp(problem)
    assert res.status == UNBOUNDED


def test_redundant_rows_are_harmless():
    problem = LpProblem(
        c=[1.0, 1.0],
        a_eq=[[1.0, 1.0], [2.0, 2.0]], b_eq=[1.0, 2.0],
        lb=[0.0, 0.0],
    )
    res = solve_lp(problem)
    assert res.status == OPTIMAL
    assert res.objective == pytest.approx(1.0, abs=1e-9)


def test_fixed_variable():
    problem = LpProblem(
        c=[1.0, -1.0], lb=[0.5, 0.0], ub=[0.5, 2.0],
    )
    res = solve_lp(problem)
    assert res.status == OPTIMAL
    np.testing.assert_allclose(res.x, [0.5, 2.0], atol=1e-12)


def test_deterministic_repeat():
    rng = np.random.default_rng(99)
    c = rng.normal(size=6)
    a_in = rng.normal(size=(4, 6))
    b_in = np.abs(rng.normal(size=4)) + 1.0
    problem = LpProblem(c=c, a_in=a_in, b_in=b_in, lb=np.full(6, -2.0), ub=np.full(6, 2.0))
    first = solve_lp(problem)
    second = solve_lp(problem)
    assert first.status == second.status == OPTIMAL
    assert np.array_equal(first.x, second.x)
    assert first.iterations == second.iterations


def test_degenerate_vertex():
    # several rows meet at the optimum; Bland fallback must avoid cycling
    problem = LpProblem(
        c=[-1.0, -1.0],
        a_in=[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
        b_in=[1.0, 1.0, 2.0],
        lb=[0.0, 0.0],
    )
    res = solve_lp(problem)
    assert res.status == OPTIMAL
    assert res.objective == pytest.approx(-2.0, abs=1e-9)
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-9)
