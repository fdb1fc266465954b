"""Line-search SQP for smooth nonlinear programs.

The problem is supplied through a single fused callback that returns the
objective, gradient, constraint values, and constraint Jacobians in one
structure, since the expensive pieces of our planning problems share almost
all of their intermediate work.

Method: quadratic subproblems with a damped BFGS Hessian, an L1 exact
penalty line search, and an elastic (slack-relaxed) subproblem fallback when
the linearized constraints are inconsistent. Convergence is certified with
the same independent KKT checker used by the LP and QP solvers.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .common import (
    DEFAULT_TOLERANCES,
    MAX_ITER,
    NUMERICAL_ERROR,
    OPTIMAL,
    QpProblem,
    SolverTolerances,
    SolveResult,
)
from .kkt import check_kkt
from .qp import solve_qp


@dataclass(frozen=True)
class NlpEval:
    """One evaluation of objective and constraints at a point.

    Inequalities follow the c_in(x) <= 0 convention; equalities c_eq(x) = 0.
    Jacobian rows correspond to constraint entries.
    """

    f: float
    grad: np.ndarray
    c_eq: np.ndarray
    jac_eq: np.ndarray
    c_in: np.ndarray
    jac_in: np.ndarray


@dataclass(frozen=True)
class NlpProblem:
    """Smooth NLP with box bounds and a fused evaluation callback."""

    n: int
    evaluate: Callable[[np.ndarray], NlpEval]
    lb: np.ndarray = field(default=None)  # type: ignore[assignment]
    ub: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        lb = np.full(self.n, -np.inf) if self.lb is None else np.asarray(self.lb, float)
        ub = np.full(self.n, np.inf) if self.ub is None else np.asarray(self.ub, float)
        if lb.shape != (self.n,) or ub.shape != (self.n,):
            raise ValueError("bound shapes must match problem dimension")
        if np.any(lb > ub):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "lb", lb)
        object.__setattr__(self, "ub", ub)


def _violation(ev: NlpEval) -> float:
    v = 0.0
    if ev.c_eq.size:
        v += float(np.sum(np.abs(ev.c_eq)))
    if ev.c_in.size:
        v += float(np.sum(np.maximum(ev.c_in, 0.0)))
    return v


def _merit(ev: NlpEval, rho: float) -> float:
    return ev.f + rho * _violation(ev)


def _solve_subproblem(
    b_mat: np.ndarray,
    ev: NlpEval,
    lb_d: np.ndarray,
    ub_d: np.ndarray,
    tolerances: SolverTolerances,
):
    """QP step on the linearized model; elastic retry when inconsistent.

    Returns (d, duals_eq, duals_in, duals_lb, duals_ub, ok).
    """
    n = b_mat.shape[0]
    m_eq, m_in = ev.c_eq.size, ev.c_in.size
    qp = QpProblem(
        h=b_mat, c=ev.grad,
        a_eq=ev.jac_eq if m_eq else None, b_eq=-ev.c_eq if m_eq else None,
        a_in=ev.jac_in if m_in else None, b_in=-ev.c_in if m_in else None,
        lb=lb_d, ub=ub_d,
    )
    res = solve_qp(qp, tolerances)
    if res.status == OPTIMAL:
        return (res.x, res.duals_eq, res.duals_in, res.duals_lb, res.duals_ub, True)

    # elastic relaxation: slacks absorb the linearized infeasibility
    n_s = 2 * m_eq + m_in
    if n_s == 0:
        return (np.zeros(n), np.zeros(0), np.zeros(0),
                np.zeros(n), np.zeros(n), False)
    penalty = 1e3 * (1.0 + float(np.max(np.abs(ev.grad), initial=0.0)))
    h_el = np.zeros((n + n_s, n + n_s))
    h_el[:n, :n] = b_mat
    # unit curvature on the slacks keeps the QP well conditioned while the
    # linear penalty term still dominates their cost
    h_el[np.arange(n, n + n_s), np.arange(n, n + n_s)] = 1.0
    c_el = np.concatenate([ev.grad, np.full(n_s, penalty)])
    a_eq = b_eq = None
    if m_eq:
        a_eq = np.zeros((m_eq, n + n_s))
        a_eq[:, :n] = ev.jac_eq
        a_eq[:, n : n + m_eq] = np.eye(m_eq)
        a_eq[:, n + m_eq : n + 2 * m_eq] = -np.eye(m_eq)
        b_eq = -ev.c_eq
    a_in = b_in = None
    if m_in:
        a_in = np.zeros((m_in, n + n_s))
        a_in[:, :n] = ev.jac_in
        a_in[:, n + 2 * m_eq :] = -np.eye(m_in)
        b_in = -ev.c_in
    lb_el = np.concatenate([lb_d, np.zeros(n_s)])
    ub_el = np.concatenate([ub_d, np.full(n_s, np.inf)])
    res = solve_qp(
        QpProblem(h=h_el, c=c_el, a_eq=a_eq, b_eq=b_eq, a_in=a_in, b_in=b_in,
                  lb=lb_el, ub=ub_el),
        tolerances,
    )
    if res.status != OPTIMAL:
        return (np.zeros(n), np.zeros(m_eq), np.zeros(m_in),
                np.zeros(n), np.zeros(n), False)
    return (res.x[:n], res.duals_eq, res.duals_in,
            res.duals_lb[:n], res.duals_ub[:n], True)


def solve_nlp(
    problem: NlpProblem,
    x0: np.ndarray,
    tolerances: SolverTolerances = DEFAULT_TOLERANCES,
    max_iter: int = 200,
    verbose: bool = False,
) -> SolveResult:
    """Solve a smooth NLP from the given starting point.

    Status optimal is only reported when the independent KKT check passes at
    the configured tolerance; a stalled line search or iteration cap yields
    max_iter, and an irrecoverable subproblem failure yields numerical_error.
    """
    t_start = time.perf_counter()
    n = problem.n
    x = np.clip(np.asarray(x0, float), problem.lb, problem.ub)
    ev = problem.evaluate(x)
    b_mat = np.eye(n)
    lam = np.zeros(ev.c_eq.size)
    mu = np.zeros(ev.c_in.size)
    pi_lb = np.zeros(n)
    pi_ub = np.zeros(n)
    rho = 1.0
    status = MAX_ITER
    message = "iteration limit reached"
    iters = 0

    def kkt_report(ev_now, lam_now, mu_now, pl, pu):
        return check_kkt(
            x, ev_now.grad, problem.lb, problem.ub,
            c_eq=ev_now.c_eq if ev_now.c_eq.size else None,
            jac_eq=ev_now.jac_eq if ev_now.c_eq.size else None,
            c_in=ev_now.c_in if ev_now.c_in.size else None,
            jac_in=ev_now.jac_in if ev_now.c_in.size else None,
            duals_eq=lam_now if ev_now.c_eq.size else None,
            duals_in=mu_now if ev_now.c_in.size else None,
            duals_lb=pl, duals_ub=pu,
        )

    report = kkt_report(ev, lam, mu, pi_lb, pi_ub)
    if report.satisfied(tolerances.nlp_kkt):
        return SolveResult(
            status=OPTIMAL, x=x, objective=ev.f, iterations=0,
            wall_time=time.perf_counter() - t_start,
            kkt_residuals=report.as_dict(),
            duals_eq=lam, duals_in=mu, duals_lb=pi_lb, duals_ub=pi_ub,
        )

    for iters in range(1, max_iter + 1):
        d, lam_new, mu_new, pl_new, pu_new, ok = _solve_subproblem(
            b_mat, ev, problem.lb - x, problem.ub - x, tolerances,
        )
        if not ok:
            status = NUMERICAL_ERROR
            message = "quadratic subproblem failed"
            break

        mult_inf = 0.0
        for arr in (lam_new, mu_new, pl_new, pu_new):
            if arr.size:
                mult_inf = max(mult_inf, float(np.max(np.abs(arr))))
        rho = max(rho, 1.5 * mult_inf + 0.1)

        phi0 = _merit(ev, rho)
        descent = float(ev.grad @ d) - rho * _violation(ev)
        alpha = 1.0
        ev_trial = ev
        x_trial = x
        while True:
            x_trial = x + alpha * d
            ev_trial = problem.evaluate(x_trial)
            if _merit(ev_trial, rho) <= phi0 + 0.1 * alpha * descent + 1e-12 * (
                1.0 + abs(phi0)
            ):
                break
            alpha *= 0.5
            if alpha < 1e-10:
                break

        # damped BFGS on the Lagrangian gradient difference
        g_old = ev.grad.copy()
        if lam_new.size:
            g_old += ev.jac_eq.T @ lam_new
        if mu_new.size:
            g_old += ev.jac_in.T @ mu_new
        g_new = ev_trial.grad.copy()
        if lam_new.size:
            g_new += ev_trial.jac_eq.T @ lam_new
        if mu_new.size:
            g_new += ev_trial.jac_in.T @ mu_new
        s_vec = x_trial - x
        y_vec = g_new - g_old
        s_norm = float(np.linalg.norm(s_vec))
        if s_norm > 1e-14:
            bs = b_mat @ s_vec
            s_bs = float(s_vec @ bs)
            s_y = float(s_vec @ y_vec)
            if s_bs <= 0.0:
                b_mat = np.eye(n)
            else:
                if s_y < 0.2 * s_bs:
                    theta = 0.8 * s_bs / (s_bs - s_y)
                    y_vec = theta * y_vec + (1.0 - theta) * bs
                    s_y = float(s_vec @ y_vec)
                b_mat = (
                    b_mat
                    + np.outer(y_vec, y_vec) / s_y
                    - np.outer(bs, bs) / s_bs
                )

        x, ev = x_trial, ev_trial
        lam, mu, pi_lb, pi_ub = lam_new, mu_new, pl_new, pu_new

        report = kkt_report(ev, lam, mu, pi_lb, pi_ub)
        if verbose:
            print(
                f"it {iters:4d} f {ev.f: .9e} viol {_violation(ev):.3e} "
                f"alpha {alpha:.2e} |d| {np.linalg.norm(d):.3e} "
                f"kkt {report.worst():.3e} rho {rho:.1e}"
            )
        if report.satisfied(tolerances.nlp_kkt):
            status = OPTIMAL
            message = ""
            break
        if alpha * float(np.linalg.norm(d)) < tolerances.nlp_step:
            status = MAX_ITER
            message = "step size below tolerance before reaching KKT point"
            break

    result = SolveResult(
        status=status, x=x, objective=ev.f, iterations=iters,
        wall_time=time.perf_counter() - t_start,
        kkt_residuals=report.as_dict(),
        duals_eq=lam, duals_in=mu, duals_lb=pi_lb, duals_ub=pi_ub,
        message=message,
    )
    if status == OPTIMAL and not report.satisfied(tolerances.nlp_kkt):
        result.status = NUMERICAL_ERROR
        result.message = "certificate check failed"
    return result
