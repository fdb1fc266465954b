"""Dense strictly convex QP via a dual active-set method.

Starts from the unconstrained minimizer and adds violated constraints one at
a time, keeping dual feasibility throughout; the objective is therefore
monotonically non-decreasing across iterations (checked at runtime). The
implementation maintains the inverse Cholesky factor J = L^-T Q and the
triangular factor R of the active-constraint normals, both updated with
Givens rotations on constraint addition and removal.

Equality rows are installed into the active set first, are never candidates
for removal, and may carry duals of either sign. The Hessian must be
positive definite; callers with merely semidefinite cost add their own
regularization.

The iteration works on an equilibrated copy of the problem (unit Hessian
diagonal, unit-norm constraint rows) and maps the solution and multipliers
back before checking the optimality certificate on the original data.
"""

from __future__ import annotations

import math
import time

import numpy as np

from .common import (
    DEFAULT_TOLERANCES,
    INFEASIBLE,
    MAX_ITER,
    NUMERICAL_ERROR,
    OPTIMAL,
    QpProblem,
    SolverTolerances,
    SolveResult,
)
from .kkt import check_kkt

_KIND_EQ, _KIND_IN, _KIND_LB, _KIND_UB = 0, 1, 2, 3


def _build_rows(problem: QpProblem):
    """Stack every constraint as a normal.x >= rhs row of unit norm.

    Inequalities a.x <= b become -a.x >= -b, upper bounds likewise; kinds and
    origins let the duals be routed back to the problem-level fields. Each
    row is divided by its Euclidean norm (returned as the last element) so
    the feasibility tolerance means the same distance for every constraint;
    duals must be divided by the same factor on the way out.
    """
    n = problem.n
    normals, rhs, kinds, origins = [], [], [], []
    for i in range(problem.a_eq.shape[0]):
        normals.append(problem.a_eq[i])
        rhs.append(problem.b_eq[i])
        kinds.append(_KIND_EQ)
        origins.append(i)
    for i in range(problem.a_in.shape[0]):
        normals.append(-problem.a_in[i])
        rhs.append(-problem.b_in[i])
        kinds.append(_KIND_IN)
        origins.append(i)
    for j in range(n):
        if np.isfinite(problem.lb[j]):
            e = np.zeros(n)
            e[j] = 1.0
            normals.append(e)
            rhs.append(problem.lb[j])
            kinds.append(_KIND_LB)
            origins.append(j)
        if np.isfinite(problem.ub[j]):
            e = np.zeros(n)
            e[j] = -1.0
            normals.append(e)
            rhs.append(-problem.ub[j])
            kinds.append(_KIND_UB)
            origins.append(j)
    if not normals:
        return (np.zeros((0, n)), np.zeros(0), np.zeros(0, dtype=int),
                np.zeros(0, dtype=int), np.zeros(0))
    normals = np.array(normals)
    rhs = np.array(rhs)
    row_scale = np.linalg.norm(normals, axis=1)
    row_scale[row_scale == 0.0] = 1.0
    normals /= row_scale[:, None]
    rhs /= row_scale
    return normals, rhs, np.array(kinds), np.array(origins), row_scale


def _givens(a: float, b: float) -> tuple[float, float, float]:
    """Rotation with c*a + s*b = r and -s*a + c*b = 0.

    b == 0 must map to the identity with r = a (sign preserved): callers
    skip the factor update whenever s == 0, so returning r = |a| there
    would flip a sign in one place but not the other.
    """
    if b == 0.0:
        return 1.0, 0.0, a
    r = math.hypot(a, b)
    return a / r, b / r, r


class _ActiveSet:
    """Factor state for the dual iteration: J = L^-T Q and triangular R."""

    def __init__(self, j_mat: np.ndarray):
        n = j_mat.shape[0]
        self.j = j_mat
        self.r = np.zeros((n, n))
        self.members: list[int] = []
        self.is_eq: list[bool] = []
        self.u = np.zeros(0)

    @property
    def q(self) -> int:
        return len(self.members)

    def project(self, normal: np.ndarray):
        """Split J^T normal into range (r step) and null (z step) parts."""
        q = self.q
        d = self.j.T @ normal
        z = self.j[:, q:] @ d[q:]
        r_step = np.linalg.solve(self.r[:q, :q], d[:q]) if q else np.zeros(0)
        return d, z, r_step

    def add(self, row: int, eq: bool, d: np.ndarray, dual: float) -> None:
        q, n = self.q, self.j.shape[0]
        d = d.copy()
        for i in range(n - 1, q, -1):
            c, s, r = _givens(d[i - 1], d[i])
            if s != 0.0:
                col_a, col_b = self.j[:, i - 1].copy(), self.j[:, i].copy()
                self.j[:, i - 1] = c * col_a + s * col_b
                self.j[:, i] = -s * col_a + c * col_b
            d[i - 1], d[i] = r, 0.0
        self.r[: q + 1, q] = d[: q + 1]
        self.members.append(row)
        self.is_eq.append(eq)
        self.u = np.append(self.u, dual)

    def drop(self, pos: int) -> None:
        q = self.q
        self.r[:, pos : q - 1] = self.r[:, pos + 1 : q]
        self.r[:, q - 1] = 0.0
        for i in range(pos, q - 1):
            c, s, r = _givens(self.r[i, i], self.r[i + 1, i])
            if s != 0.0:
                row_a, row_b = self.r[i, :].copy(), self.r[i + 1, :].copy()
                self.r[i, :] = c * row_a + s * row_b
                self.r[i + 1, :] = -s * row_a + c * row_b
                col_a, col_b = self.j[:, i].copy(), self.j[:, i + 1].copy()
                self.j[:, i] = c * col_a + s * col_b
                self.j[:, i + 1] = -s * col_a + c * col_b
            self.r[i, i] = r
            self.r[i + 1, i] = 0.0
        del self.members[pos]
        del self.is_eq[pos]
        self.u = np.delete(self.u, pos)


def solve_qp(
    problem: QpProblem,
    tolerances: SolverTolerances = DEFAULT_TOLERANCES,
    max_iter: int | None = None,
    verbose: bool = False,
) -> SolveResult:
    """Solve a dense strictly convex QP.

    Returns status optimal, infeasible, max_iter, or numerical_error. A
    Hessian that fails its Cholesky factorization reports numerical_error
    with a message suggesting regularization.

    The iteration runs on a Jacobi-equilibrated copy of the problem: mixed
    penalty objectives put the Hessian diagonal across ten or more orders
    of magnitude, and the factorized dual updates cannot keep the objective
    monotone in double precision at that conditioning. The solution and
    multipliers are mapped back, and the optimality certificate is checked
    on the caller's problem.
    """
    t_start = time.perf_counter()
    n = problem.n
    tol = tolerances.qp_feasibility

    d_scale = 1.0 / np.sqrt(np.clip(np.abs(np.diagonal(problem.h)), 1e-12, None))
    work = QpProblem(
        h=problem.h * np.outer(d_scale, d_scale),
        c=problem.c * d_scale,
        a_eq=problem.a_eq * d_scale,
        b_eq=problem.b_eq,
        a_in=problem.a_in * d_scale,
        b_in=problem.b_in,
        lb=problem.lb / d_scale,
        ub=problem.ub / d_scale,
    )

    try:
        chol = np.linalg.cholesky(work.h)
    except np.linalg.LinAlgError:
        return SolveResult(
            status=NUMERICAL_ERROR, x=np.zeros(n), objective=np.nan, iterations=0,
            wall_time=time.perf_counter() - t_start,
            message="Hessian is not positive definite; add regularization",
        )
    x = -np.linalg.solve(chol.T, np.linalg.solve(chol, work.c))
    j_mat = np.linalg.solve(chol, np.eye(n)).T
    acts = _ActiveSet(j_mat)

    normals, rhs, kinds, origins, row_scale = _build_rows(work)
    n_rows = len(rhs)
    if max_iter is None:
        max_iter = 4 * (n + n_rows) + 100

    eq_sign = np.ones(n_rows)
    pending_eq = [i for i in range(n_rows) if kinds[i] == _KIND_EQ]
    iters = 0
    status = OPTIMAL
    message = ""

    def objective_at(v: np.ndarray) -> float:
        return 0.5 * float(v @ (work.h @ v)) + float(work.c @ v)

    def pick_violated():
        mask = np.ones(n_rows, dtype=bool)
        mask[kinds == _KIND_EQ] = False
        mask[acts.members] = False
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            return None, 0.0
        slack = normals[idx] @ x - rhs[idx]
        worst = int(np.argmin(slack))
        if slack[worst] >= -tol:
            return None, 0.0
        return int(idx[worst]), float(slack[worst])

    target = None
    s_p = 0.0
    u_target = 0.0
    f_floor = -np.inf

    while True:
        if target is None:
            if pending_eq:
                target = pending_eq.pop(0)
                s_p = float(normals[target] @ x - rhs[target])
                if s_p > 0.0:
                    eq_sign[target] = -1.0
                    s_p = -s_p
            else:
                target, s_p = pick_violated()
                if target is None:
                    break
            u_target = 0.0
        if iters >= max_iter:
            status, message = MAX_ITER, "iteration limit reached"
            break
        iters += 1

        n_p = eq_sign[target] * normals[target]
        d, z, r_step = acts.project(n_p)
        z_np = float(z @ n_p)

        if (
            kinds[target] == _KIND_EQ
            and z_np <= 1e-13 * (1.0 + float(n_p @ n_p))
            and abs(s_p) <= 10.0 * tol
        ):
            # row is implied by equalities already installed; skip it
            target = None
            continue

        t1, k_drop = np.inf, -1
        for pos in range(acts.q):
            if acts.is_eq[pos] or r_step[pos] <= tol:
                continue
            cand = acts.u[pos] / r_step[pos]
            if cand < t1 - 1e-14:
                t1, k_drop = cand, pos
        t2 = np.inf if z_np <= 1e-13 * (1.0 + float(n_p @ n_p)) else -s_p / z_np
        t = min(t1, t2)

        if not np.isfinite(t):
            status = INFEASIBLE
            message = "dual ray found; constraints are inconsistent"
            break
        t = max(t, 0.0)

        if np.isfinite(t2):
            x = x + t * z
        if acts.q:
            acts.u = acts.u - t * r_step
        u_target += t

        if verbose:
            g_res = work.h @ x + work.c - u_target * n_p
            for pos, row in enumerate(acts.members):
                g_res -= acts.u[pos] * eq_sign[row] * normals[row]
            print(
                f"iter {iters:4d} row {target:4d} kind {kinds[target]} "
                f"q {acts.q:3d} s_p {s_p: .3e} z_np {z_np: .3e} "
                f"t1 {t1: .3e} t2 {t2: .3e} f {objective_at(x): .9e} "
                f"stat {np.max(np.abs(g_res)): .3e}"
            )

        if t == t2 and np.isfinite(t2):
            f_now = objective_at(x)
            if f_now < f_floor - 1e-7 * (1.0 + abs(f_floor)):
                status = NUMERICAL_ERROR
                message = "objective decreased during dual iteration"
                break
            f_floor = max(f_floor, f_now)
            acts.add(target, kinds[target] == _KIND_EQ, d, u_target)
            target = None
        else:
            acts.drop(k_drop)
            if np.isfinite(t2):
                s_p = float(n_p @ x) - float(rhs[target]) * eq_sign[target]

    return _finish(problem, d_scale, row_scale, x, acts, eq_sign, kinds,
                   origins, status, iters, t_start, tolerances, message)


def _finish(
    problem: QpProblem,
    d_scale: np.ndarray,
    row_scale: np.ndarray,
    x_scaled: np.ndarray,
    acts: _ActiveSet,
    eq_sign: np.ndarray,
    kinds: np.ndarray,
    origins: np.ndarray,
    status: str,
    iterations: int,
    t_start: float,
    tolerances: SolverTolerances,
    message: str = "",
) -> SolveResult:
    n = problem.n
    x = d_scale * x_scaled
    m_eq = problem.a_eq.shape[0]
    m_in = problem.a_in.shape[0]
    duals_eq = np.zeros(m_eq)
    duals_in = np.zeros(m_in)
    duals_lb = np.zeros(n)
    duals_ub = np.zeros(n)
    for pos, row in enumerate(acts.members):
        # the iteration saw unit-norm rows of the equilibrated problem, so
        # each dual is divided by the row norm it absorbed, and bound rows
        # (scaled normals e_j / d_j) by the variable factor as well
        u_val = float(acts.u[pos]) / float(row_scale[row])
        kind, orig = int(kinds[row]), int(origins[row])
        if kind == _KIND_EQ:
            # stationarity uses grad + A_eq^T lam = 0 while the iteration
            # tracked grad = u * sign * a, hence the negated sign here
            duals_eq[orig] = -eq_sign[row] * u_val
        elif kind == _KIND_IN:
            duals_in[orig] = max(u_val, 0.0)
        elif kind == _KIND_LB:
            duals_lb[orig] = max(u_val, 0.0) / d_scale[orig]
        else:
            duals_ub[orig] = max(u_val, 0.0) / d_scale[orig]

    report = None
    if status == OPTIMAL:
        report = _kkt_report(problem, x, duals_eq, duals_in, duals_lb, duals_ub)
        polished = _polish(problem, acts, kinds, origins)
        if polished is not None:
            polished_report = _kkt_report(problem, *polished)
            if polished_report.worst() < report.worst():
                x, duals_eq, duals_in, duals_lb, duals_ub = polished
                report = polished_report

    objective = 0.5 * float(x @ (problem.h @ x)) + float(problem.c @ x)
    result = SolveResult(
        status=status, x=x, objective=objective, iterations=iterations,
        wall_time=time.perf_counter() - t_start,
        duals_eq=duals_eq, duals_in=duals_in, duals_lb=duals_lb,
        duals_ub=duals_ub, message=message,
    )
    if report is not None:
        result.kkt_residuals = report.as_dict()
        if not report.satisfied(100.0 * tolerances.qp_feasibility):
            result.status = NUMERICAL_ERROR
            result.message = (
                f"certificate check failed (worst residual {report.worst():.3e})"
            )
    return result


def _kkt_report(problem, x, duals_eq, duals_in, duals_lb, duals_ub):
    m_eq = problem.a_eq.shape[0]
    m_in = problem.a_in.shape[0]
    grad = problem.h @ x + problem.c
    return check_kkt(
        x, grad, problem.lb, problem.ub,
        c_eq=problem.a_eq @ x - problem.b_eq if m_eq else None,
        jac_eq=problem.a_eq if m_eq else None,
        c_in=problem.a_in @ x - problem.b_in if m_in else None,
        jac_in=problem.a_in if m_in else None,
        duals_eq=duals_eq, duals_in=duals_in,
        duals_lb=duals_lb, duals_ub=duals_ub,
    )


def _polish(problem, acts: _ActiveSet, kinds: np.ndarray, origins: np.ndarray):
    """Newton re-solve of the settled active set in the caller's units.

    The iteration's residuals live on the equilibrated copy and map back
    amplified along stiff columns; one KKT solve at the final active set
    recovers full precision there. Returns the candidate point and duals,
    or None when the system is singular.
    """
    n = problem.n
    q = acts.q
    b_rows = np.zeros((q, n))
    rhs = np.zeros(q)
    for pos, row in enumerate(acts.members):
        kind, orig = int(kinds[row]), int(origins[row])
        if kind == _KIND_EQ:
            b_rows[pos] = problem.a_eq[orig]
            rhs[pos] = problem.b_eq[orig]
        elif kind == _KIND_IN:
            b_rows[pos] = problem.a_in[orig]
            rhs[pos] = problem.b_in[orig]
        elif kind == _KIND_LB:
            b_rows[pos, orig] = -1.0
            rhs[pos] = -problem.lb[orig]
        else:
            b_rows[pos, orig] = 1.0
            rhs[pos] = problem.ub[orig]
    kkt = np.zeros((n + q, n + q))
    kkt[:n, :n] = problem.h
    kkt[:n, n:] = b_rows.T
    kkt[n:, :n] = b_rows
    try:
        sol = np.linalg.solve(kkt, np.concatenate([-problem.c, rhs]))
    except np.linalg.LinAlgError:
        return None
    x = sol[:n]
    mults = sol[n:]
    duals_eq = np.zeros(problem.a_eq.shape[0])
    duals_in = np.zeros(problem.a_in.shape[0])
    duals_lb = np.zeros(n)
    duals_ub = np.zeros(n)
    for pos, row in enumerate(acts.members):
        kind, orig = int(kinds[row]), int(origins[row])
        if kind == _KIND_EQ:
            duals_eq[orig] = mults[pos]
        elif kind == _KIND_IN:
            duals_in[orig] = max(mults[pos], 0.0)
        elif kind == _KIND_LB:
            duals_lb[orig] = max(mults[pos], 0.0)
        else:
            duals_ub[orig] = max(mults[pos], 0.0)
    return x, duals_eq, duals_in, duals_lb, duals_ub
