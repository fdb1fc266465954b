"""Dense linear programming via a two-phase revised simplex method.

Variables carry individual bounds (including infinite ones), inequality rows
get slack variables, and phase 1 introduces signed artificial columns that
are driven out before phase 2. The basis matrix is refactorized every
iteration, which is robust and plenty fast at the few-hundred-row scale this
package produces. Pricing is Dantzig's rule with a switch to Bland's rule
after an iteration threshold so cycling cannot occur; all ties break toward
the smallest variable index for determinism.
"""

from __future__ import annotations

import time

import numpy as np

from .common import (
    DEFAULT_TOLERANCES,
    INFEASIBLE,
    MAX_ITER,
    NUMERICAL_ERROR,
    OPTIMAL,
    UNBOUNDED,
    LpProblem,
    SolverTolerances,
    SolveResult,
)
from .kkt import check_kkt

_PIVOT_TOL = 1e-10
_AT_LOWER, _AT_UPPER, _FREE, _BASIC = 0, 1, 2, 3


def _basis_solve(mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve against the basis, rescuing a numerically singular factorization.

    Degenerate pivot sequences can leave the basis matrix singular to working
    precision. A least-squares step keeps the iteration alive so the offending
    column can pivot back out; the final KKT check still gates optimality.
    """
    try:
        out = np.linalg.solve(mat, rhs)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(mat, rhs, rcond=None)[0]
    if not np.all(np.isfinite(out)):
        return np.linalg.lstsq(mat, rhs, rcond=None)[0]
    return out


class _Tableau:
    """Mutable simplex state over the extended variable set."""

    def __init__(self, a: np.ndarray, b: np.ndarray, lb: np.ndarray, ub: np.ndarray):
        self.a = a
        self.b = b
        self.lb = lb
        self.ub = ub
        self.m, self.n_all = a.shape
        self.state = np.empty(self.n_all, dtype=int)
        for j in range(self.n_all):
            if np.isfinite(lb[j]):
                self.state[j] = _AT_LOWER
            elif np.isfinite(ub[j]):
                self.state[j] = _AT_UPPER
            else:
                self.state[j] = _FREE
        self.basis = np.zeros(self.m, dtype=int)

    def nonbasic_values(self) -> np.ndarray:
        vals = np.where(self.state == _AT_LOWER, self.lb, 0.0)
        vals = np.where(self.state == _AT_UPPER, self.ub, vals)
        vals[self.state == _BASIC] = 0.0
        return vals

    def values(self) -> np.ndarray:
        vals = self.nonbasic_values()
        bmat = self.a[:, self.basis]
        vals[self.basis] = _basis_solve(bmat, self.b - self.a @ vals)
        return vals


def _price(tab: _Tableau, cost: np.ndarray, tol: float, bland: bool):
    """Entering variable and its direction, or None at optimality."""
    bmat = tab.a[:, tab.basis]
    y = _basis_solve(bmat.T, cost[tab.basis])
    rc = cost - tab.a.T @ y
    fixed = tab.ub - tab.lb <= 0.0
    can_up = (tab.state == _AT_LOWER) & (rc < -tol) & ~fixed
    can_down = (tab.state == _AT_UPPER) & (rc > tol) & ~fixed
    free_move = (tab.state == _FREE) & (np.abs(rc) > tol)
    eligible = can_up | can_down | free_move
    if not np.any(eligible):
        return None, 0.0, rc
    idx = np.flatnonzero(eligible)
    if bland:
        j = int(idx[0])
    else:
        j = int(idx[np.argmax(np.abs(rc[idx]))])
    direction = 1.0 if (can_up[j] or (free_move[j] and rc[j] < 0.0)) else -1.0
    return j, direction, rc


def _ratio_test(tab: _Tableau, j: int, direction: float, vals: np.ndarray):
    """Largest step for entering variable j; returns (theta, leaving position).

    A leaving position of -1 means the entering variable flips to its other
    bound without a basis change.
    """
    bmat = tab.a[:, tab.basis]
    w = _basis_solve(bmat, tab.a[:, j])
    theta = np.inf
    if tab.state[j] != _FREE:
        theta = tab.ub[j] - tab.lb[j]
    leave_pos, leave_to = -1, _AT_UPPER if tab.state[j] == _AT_LOWER else _AT_LOWER
    for i in range(tab.m):
        delta = direction * w[i]
        var = tab.basis[i]
        if delta > _PIVOT_TOL:
            if not np.isfinite(tab.lb[var]):
                continue
            cand = (vals[var] - tab.lb[var]) / delta
            to_state = _AT_LOWER
        elif delta < -_PIVOT_TOL:
            if not np.isfinite(tab.ub[var]):
                continue
            cand = (tab.ub[var] - vals[var]) / (-delta)
            to_state = _AT_UPPER
        else:
            continue
        cand = max(cand, 0.0)
        if cand < theta - 1e-12:
            take = True
        elif cand <= theta + 1e-12 and np.isfinite(theta):
            # tie: prefer a basis change, then the smallest leaving variable
            take = leave_pos == -1 or var < tab.basis[leave_pos]
        else:
            take = False
        if take:
            theta, leave_pos, leave_to = cand, i, to_state
    return theta, leave_pos, leave_to


def _run_simplex(tab: _Tableau, cost: np.ndarray, tol: float, max_iter: int, bland_after: int):
    """Iterate to optimality; returns (status, iterations)."""
    for it in range(max_iter):
        bland = it >= bland_after
        j, direction, _ = _price(tab, cost, tol, bland)
        if j is None:
            return OPTIMAL, it
        vals = tab.values()
        theta, leave_pos, leave_to = _ratio_test(tab, j, direction, vals)
        if not np.isfinite(theta):
            return UNBOUNDED, it
        if leave_pos == -1:
            tab.state[j] = _AT_UPPER if tab.state[j] == _AT_LOWER else _AT_LOWER
            continue
        leaving = tab.basis[leave_pos]
        tab.basis[leave_pos] = j
        tab.state[j] = _BASIC
        tab.state[leaving] = leave_to
    return MAX_ITER, max_iter


def _expel_artificials(tab: _Tableau, n_real: int) -> None:
    """Pivot zero-level artificials out of the basis where possible."""
    for pos in range(tab.m):
        if tab.basis[pos] < n_real:
            continue
        bmat = tab.a[:, tab.basis]
        e = np.zeros(tab.m)
        e[pos] = 1.0
        row = _basis_solve(bmat.T, e) @ tab.a[:, :n_real]
        candidates = np.flatnonzero((np.abs(row) > 1e-9) & (tab.state[:n_real] != _BASIC))
        if len(candidates) == 0:
            continue  # redundant row; artificial stays basic pinned at zero
        enter = int(candidates[0])
        art = tab.basis[pos]
        tab.basis[pos] = enter
        tab.state[enter] = _BASIC
        tab.state[art] = _AT_LOWER


def solve_lp(
    problem: LpProblem,
    tolerances: SolverTolerances = DEFAULT_TOLERANCES,
    max_iter: int = 20000,
    verbose: bool = False,
) -> SolveResult:
    """Solve a bounded dense LP.

    Returns a SolveResult whose status is one of optimal, infeasible,
    unbounded, max_iter, or numerical_error. On optimal the result carries
    duals and the independently computed KKT residuals.
    """
    t_start = time.perf_counter()
    n = problem.n
    m_eq, m_in = problem.a_eq.shape[0], problem.a_in.shape[0]
    m = m_eq + m_in
    tol = tolerances.lp_feasibility * 10.0

    if m == 0:
        return _solve_box_only(problem, t_start)

    # extended columns: structural, slacks, artificials
    n_slack = m_in
    n_real = n + n_slack
    a = np.zeros((m, n_real + m))
    a[:m_eq, :n] = problem.a_eq
    a[m_eq:, :n] = problem.a_in
    a[m_eq:, n : n + n_slack] = np.eye(m_in)
    b = np.concatenate([problem.b_eq, problem.b_in])
    lb = np.concatenate([problem.lb, np.zeros(n_slack), np.zeros(m)])
    ub = np.concatenate([problem.ub, np.full(n_slack, np.inf), np.full(m, np.inf)])

    tab = _Tableau(a, b, lb, ub)
    start_vals = tab.nonbasic_values()
    start_vals[n_real:] = 0.0
    residual = b - a[:, :n_real] @ start_vals[:n_real]
    for i in range(m):
        a[i, n_real + i] = 1.0 if residual[i] >= 0.0 else -1.0
        tab.basis[i] = n_real + i
        tab.state[n_real + i] = _BASIC

    phase1_cost = np.zeros(n_real + m)
    phase1_cost[n_real:] = 1.0
    bland_after = 3 * (m + n_real) + 50
    status1, iters1 = _run_simplex(tab, phase1_cost, tol, max_iter, bland_after)
    phase1_obj = float(phase1_cost @ tab.values())
    if status1 == MAX_ITER:
        return SolveResult(
            status=MAX_ITER, x=tab.values()[:n], objective=np.nan, iterations=iters1,
            wall_time=time.perf_counter() - t_start, message="phase 1 iteration limit",
        )
    if phase1_obj > 1e-7 * (1.0 + float(np.linalg.norm(b, np.inf))):
        return SolveResult(
            status=INFEASIBLE, x=tab.values()[:n], objective=np.nan, iterations=iters1,
            wall_time=time.perf_counter() - t_start, message=f"phase 1 objective {phase1_obj:.3e}",
        )
    _expel_artificials(tab, n_real)
    tab.ub[n_real:] = 0.0  # artificials may never move again

    cost = np.concatenate([problem.c, np.zeros(n_slack + m)])
    status2, iters2 = _run_simplex(tab, cost, tol, max_iter, bland_after)
    vals = tab.values()
    x = vals[:n]
    objective = float(problem.c @ x)
    total_iters = iters1 + iters2
    elapsed = time.perf_counter() - t_start
    if verbose:
        print(f"lp: {status2} obj={objective:.6e} iters={total_iters}")
    if status2 != OPTIMAL:
        return SolveResult(
            status=status2, x=x, objective=objective, iterations=total_iters, wall_time=elapsed
        )

    # dual extraction from the final basis
    bmat = tab.a[:, tab.basis]
    y = _basis_solve(bmat.T, cost[tab.basis])
    rc = cost[: n_real] - tab.a[:, :n_real].T @ y
    duals_eq = -y[:m_eq]
    duals_in = -y[m_eq:]
    pi_lb = np.where(tab.state[:n] == _AT_LOWER, np.maximum(rc[:n], 0.0), 0.0)
    pi_ub = np.where(tab.state[:n] == _AT_UPPER, np.maximum(-rc[:n], 0.0), 0.0)

    report = check_kkt(
        x,
        grad=problem.c,
        lb=problem.lb,
        ub=problem.ub,
        c_eq=problem.a_eq @ x - problem.b_eq,
        jac_eq=problem.a_eq,
        c_in=problem.a_in @ x - problem.b_in,
        jac_in=problem.a_in,
        duals_eq=duals_eq,
        duals_in=duals_in,
        duals_lb=pi_lb,
        duals_ub=pi_ub,
    )
    status = OPTIMAL if report.satisfied(100.0 * tolerances.lp_feasibility) else NUMERICAL_ERROR
    return SolveResult(
        status=status,
        x=x,
        objective=objective,
        iterations=total_iters,
        wall_time=elapsed,
        kkt_residuals=report.as_dict(),
        duals_eq=duals_eq,
        duals_in=duals_in,
        duals_lb=pi_lb,
        duals_ub=pi_ub,
    )


def _solve_box_only(problem: LpProblem, t_start: float) -> SolveResult:
    """Minimize c.x over a box: each coordinate independently."""
    x = np.zeros(problem.n)
    for j in range(problem.n):
        if problem.c[j] > 0.0:
            x[j] = problem.lb[j]
        elif problem.c[j] < 0.0:
            x[j] = problem.ub[j]
        else:
            x[j] = problem.lb[j] if np.isfinite(problem.lb[j]) else min(problem.ub[j], 0.0)
        if not np.isfinite(x[j]):
            return SolveResult(
                status=UNBOUNDED, x=np.zeros(problem.n), objective=-np.inf, iterations=0,
                wall_time=time.perf_counter() - t_start,
            )
    pi_lb = np.where(x == problem.lb, np.maximum(problem.c, 0.0), 0.0)
    pi_ub = np.where(x == problem.ub, np.maximum(-problem.c, 0.0), 0.0)
    return SolveResult(
        status=OPTIMAL,
        x=x,
        objective=float(problem.c @ x),
        iterations=0,
        wall_time=time.perf_counter() - t_start,
        kkt_residuals={},
        duals_eq=np.zeros(0),
        duals_in=np.zeros(0),
        duals_lb=pi_lb,
        duals_ub=pi_ub,
    )
