"""Self-contained dense LP, QP, and NLP solvers with KKT certification."""

from .common import (
    DEFAULT_TOLERANCES,
    INFEASIBLE,
    MAX_ITER,
    NUMERICAL_ERROR,
    OPTIMAL,
    UNBOUNDED,
    LpProblem,
    QpProblem,
    SolverTolerances,
    SolveResult,
)
from .kkt import KktReport, check_kkt
from .lp import solve_lp
from .nlp import NlpEval, NlpProblem, solve_nlp
from .qp import solve_qp

__all__ = [
    "DEFAULT_TOLERANCES",
    "INFEASIBLE",
    "MAX_ITER",
    "NUMERICAL_ERROR",
    "OPTIMAL",
    "UNBOUNDED",
    "KktReport",
    "LpProblem",
    "NlpEval",
    "NlpProblem",
    "QpProblem",
    "SolveResult",
    "SolverTolerances",
    "check_kkt",
    "solve_lp",
    "solve_nlp",
    "solve_qp",
]
