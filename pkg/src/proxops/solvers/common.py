"""Shared solver types: problem containers, tolerances, results."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITER = "max_iter"
NUMERICAL_ERROR = "numerical_error"


@dataclass(frozen=True)
class SolverTolerances:
    """Central tolerance record shared by the dense solvers."""

    lp_feasibility: float = 1e-8
    qp_feasibility: float = 1e-8
    nlp_kkt: float = 1e-6
    nlp_step: float = 1e-9


DEFAULT_TOLERANCES = SolverTolerances()


def _as_matrix(a, n_cols: int, name: str) -> np.ndarray:
    if a is None:
        return np.zeros((0, n_cols))
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[1] != n_cols:
        raise ValueError(f"{name} must be 2-d with {n_cols} columns, got {a.shape}")
    return a


def _as_vector(b, n_rows: int, name: str) -> np.ndarray:
    if b is None:
        return np.zeros(0)
    b = np.asarray(b, dtype=float).reshape(-1)
    if len(b) != n_rows:
        raise ValueError(f"{name} must have length {n_rows}, got {len(b)}")
    return b


def _as_bound(v, n: int, default: float) -> np.ndarray:
    if v is None:
        return np.full(n, default)
    v = np.asarray(v, dtype=float).reshape(-1)
    if len(v) != n:
        raise ValueError(f"bound vector must have length {n}, got {len(v)}")
    return v


@dataclass(frozen=True)
class LpProblem:
    """min c.x  s.t.  a_eq x = b_eq,  a_in x <= b_in,  lb <= x <= ub."""

    c: np.ndarray
    a_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    a_in: np.ndarray | None = None
    b_in: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self) -> None:
        c = np.asarray(self.c, dtype=float).reshape(-1)
        n = len(c)
        a_eq = _as_matrix(self.a_eq, n, "a_eq")
        a_in = _as_matrix(self.a_in, n, "a_in")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "a_eq", a_eq)
        object.__setattr__(self, "b_eq", _as_vector(self.b_eq, a_eq.shape[0], "b_eq"))
        object.__setattr__(self, "a_in", a_in)
        object.__setattr__(self, "b_in", _as_vector(self.b_in, a_in.shape[0], "b_in"))
        object.__setattr__(self, "lb", _as_bound(self.lb, n, -np.inf))
        object.__setattr__(self, "ub", _as_bound(self.ub, n, np.inf))
        if np.any(self.lb > self.ub):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def n(self) -> int:
        return len(self.c)


@dataclass(frozen=True)
class QpProblem:
    """min 0.5 x.H.x + c.x  s.t.  a_eq x = b_eq,  a_in x <= b_in,  lb <= x <= ub."""

    h: np.ndarray
    c: np.ndarray
    a_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    a_in: np.ndarray | None = None
    b_in: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self) -> None:
        c = np.asarray(self.c, dtype=float).reshape(-1)
        n = len(c)
        h = np.asarray(self.h, dtype=float)
        if h.shape != (n, n):
            raise ValueError(f"H must be ({n}, {n}), got {h.shape}")
        if not np.allclose(h, h.T, rtol=0.0, atol=1e-10):
            raise ValueError("H must be symmetric")
        a_eq = _as_matrix(self.a_eq, n, "a_eq")
        a_in = _as_matrix(self.a_in, n, "a_in")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "a_eq", a_eq)
        object.__setattr__(self, "b_eq", _as_vector(self.b_eq, a_eq.shape[0], "b_eq"))
        object.__setattr__(self, "a_in", a_in)
        object.__setattr__(self, "b_in", _as_vector(self.b_in, a_in.shape[0], "b_in"))
        object.__setattr__(self, "lb", _as_bound(self.lb, n, -np.inf))
        object.__setattr__(self, "ub", _as_bound(self.ub, n, np.inf))
        if np.any(self.lb > self.ub):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def n(self) -> int:
        return len(self.c)


@dataclass
class SolveResult:
    """Outcome of one LP/QP/NLP solve.

    x is the best iterate found regardless of status. Dual vectors follow the
    Lagrangian convention

        L = f(x) + lam.(eq) + mu.(ineq) - pi_lb.(x - lb) + pi_ub.(x - ub)

    with mu, pi_lb, pi_ub >= 0 at an optimum.
    """

    status: str
    x: np.ndarray
    objective: float
    iterations: int
    wall_time: float = 0.0
    kkt_residuals: dict[str, float] = field(default_factory=dict)
    duals_eq: np.ndarray | None = None
    duals_in: np.ndarray | None = None
    duals_lb: np.ndarray | None = None
    duals_ub: np.ndarray | None = None
    message: str = ""
