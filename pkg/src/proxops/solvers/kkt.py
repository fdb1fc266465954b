"""Independent first-order optimality checker.

Verifies a primal/dual certificate against the problem data directly, with
none of the solver bookkeeping: stationarity of the Lagrangian, primal
feasibility, dual signs, and complementary slackness. Solvers run this on
their own answers before reporting success, and the tests run it again from
the outside.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class KktReport:
    stationarity: float
    primal_eq: float
    primal_in: float
    primal_bounds: float
    dual_sign: float
    complementarity: float

    def worst(self) -> float:
        return max(
            self.stationarity,
            self.primal_eq,
            self.primal_in,
            self.primal_bounds,
            self.dual_sign,
            self.complementarity,
        )

    def satisfied(self, tol: float) -> bool:
        return self.worst() <= tol

    def as_dict(self) -> dict[str, float]:
        return {
            "stationarity": self.stationarity,
            "primal_eq": self.primal_eq,
            "primal_in": self.primal_in,
            "primal_bounds": self.primal_bounds,
            "dual_sign": self.dual_sign,
            "complementarity": self.complementarity,
        }


def check_kkt(
    x: np.ndarray,
    grad: np.ndarray,
    lb: np.ndarray,
    ub: np.ndarray,
    c_eq: np.ndarray | None = None,
    jac_eq: np.ndarray | None = None,
    c_in: np.ndarray | None = None,
    jac_in: np.ndarray | None = None,
    duals_eq: np.ndarray | None = None,
    duals_in: np.ndarray | None = None,
    duals_lb: np.ndarray | None = None,
    duals_ub: np.ndarray | None = None,
) -> KktReport:
    """Residuals of the first-order conditions at (x, duals).

    Args:
        x: Primal point.
        grad: Objective gradient at x.
        lb, ub: Variable bounds (+-inf allowed).
        c_eq, jac_eq: Equality residuals (= 0 at feasibility) and Jacobian.
        c_in, jac_in: Inequality residuals (<= 0 at feasibility) and Jacobian.
        duals_*: Multipliers; missing vectors are treated as zero.

    Returns:
        KktReport of infinity-norm residuals. Stationarity is measured on
        grad + jac_eq.lam + jac_in.mu - pi_lb + pi_ub.
    """
    x = np.asarray(x, dtype=float)
    grad = np.asarray(grad, dtype=float)
    n = len(x)
    c_eq = np.zeros(0) if c_eq is None else np.asarray(c_eq, dtype=float)
    c_in = np.zeros(0) if c_in is None else np.asarray(c_in, dtype=float)
    jac_eq = np.zeros((len(c_eq), n)) if jac_eq is None else np.asarray(jac_eq, dtype=float)
    jac_in = np.zeros((len(c_in), n)) if jac_in is None else np.asarray(jac_in, dtype=float)
    lam = np.zeros(len(c_eq)) if duals_eq is None else np.asarray(duals_eq, dtype=float)
    mu = np.zeros(len(c_in)) if duals_in is None else np.asarray(duals_in, dtype=float)
    pi_lb = np.zeros(n) if duals_lb is None else np.asarray(duals_lb, dtype=float)
    pi_ub = np.zeros(n) if duals_ub is None else np.asarray(duals_ub, dtype=float)

    residual = grad.copy()
    if len(c_eq):
        residual += jac_eq.T @ lam
    if len(c_in):
        residual += jac_in.T @ mu
    residual -= pi_lb
    residual += pi_ub
    stationarity = float(np.max(np.abs(residual))) if n else 0.0

    primal_eq = float(np.max(np.abs(c_eq))) if len(c_eq) else 0.0
    primal_in = float(np.max(c_in)) if len(c_in) else 0.0
    primal_in = max(primal_in, 0.0)
    viol_lb = np.where(np.isfinite(lb), lb - x, -np.inf)
    viol_ub = np.where(np.isfinite(ub), x - ub, -np.inf)
    primal_bounds = float(max(np.max(viol_lb, initial=0.0), np.max(viol_ub, initial=0.0)))

    dual_sign = 0.0
    if len(mu):
        dual_sign = max(dual_sign, float(np.max(-mu, initial=0.0)))
    dual_sign = max(dual_sign, float(np.max(-pi_lb, initial=0.0)))
    dual_sign = max(dual_sign, float(np.max(-pi_ub, initial=0.0)))

    comp = 0.0
    if len(mu):
        comp = max(comp, float(np.max(np.abs(mu * c_in), initial=0.0)))
    gap_lb = np.where(np.isfinite(lb), x - lb, 0.0)
    gap_ub = np.where(np.isfinite(ub), ub - x, 0.0)
    # multipliers on infinite bounds must vanish
    comp = max(comp, float(np.max(np.abs(pi_lb * gap_lb), initial=0.0)))
    comp = max(comp, float(np.max(np.abs(pi_ub * gap_ub), initial=0.0)))
    comp = max(comp, float(np.max(np.abs(pi_lb[~np.isfinite(lb)]), initial=0.0)))
    comp = max(comp, float(np.max(np.abs(pi_ub[~np.isfinite(ub)]), initial=0.0)))

    return KktReport(
        stationarity=stationarity,
        primal_eq=primal_eq,
        primal_in=primal_in,
        primal_bounds=primal_bounds,
        dual_sign=dual_sign,
        complementarity=comp,
    )
