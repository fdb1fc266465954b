"""B-spline bases and attitude curve fitting on the maneuver grid.

The attitude trajectory is a vector-valued spline over the planning window
[t0, tf]. Knots are placed at the interior grid nodes with repeated end
knots; for the default quintic degree the ends are exactly clamped (six
repeats each) and the collocation system used by `fit_control_points` is
square and nonsingular.

Basis values are computed with the Cox-de Boor recurrence, with the usual
convention that terms with zero-width knot spans are dropped. Evaluation is
right-continuous in t, except at the right end of the domain where the left
limit is used so the final node is part of the curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def build_knots(t0: float, tf: float, n_intervals: int, degree: int = 5) -> np.ndarray:
    """Knot vector for the maneuver window.

    Parameters
    ----------
    t0, tf : float
        Window boundaries, tf > t0.
    n_intervals : int
        Number of grid intervals; interior knots sit at the n_intervals - 1
        interior nodes of the uniform grid.
    degree : int
        Polynomial degree of the basis.

    Returns
    -------
    ndarray
        Nondecreasing knot vector with degree + 7 boundary repeats in total,
        split evenly (extra one on the left for even degree).
    """
    if tf <= t0:
        raise ValueError(f"need tf > t0, got [{t0}, {tf}]")
    if n_intervals < 1:
        raise ValueError(f"need at least one interval, got {n_intervals}")
    if degree < 1:
        raise ValueError(f"degree must be >= 1, got {degree}")
    interior = t0 + (tf - t0) * np.arange(1, n_intervals) / n_intervals
    n_rep = degree + 7
    left = n_rep - n_rep // 2
    right = n_rep // 2
    return np.concatenate([np.full(left, t0), interior, np.full(right, tf)])


@dataclass(frozen=True)
class SplineBasis:
    """A fixed knot vector and degree.

    Attributes
    ----------
    knots : ndarray
        Nondecreasing knot vector.
    degree : int
        Polynomial degree.
    """

    knots: np.ndarray
    degree: int

    def __post_init__(self) -> None:
        knots = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", knots)
        if np.any(np.diff(knots) < 0.0):
            raise ValueError("knot vector must be nondecreasing")
        if len(knots) < 2 * (self.degree + 1):
            raise ValueError("knot vector too short for the degree")

    @property
    def n_ctrl(self) -> int:
        return len(self.knots) - self.degree - 1

    @property
    def t0(self) -> float:
        return float(self.knots[0])

    @property
    def tf(self) -> float:
        return float(self.knots[-1])

    @classmethod
    def for_window(cls, t0: float, tf: float, n_intervals: int, degree: int = 5) -> "SplineBasis":
        return cls(knots=build_knots(t0, tf, n_intervals, degree), degree=degree)


def _clip_to_domain(basis: SplineBasis, ts: np.ndarray) -> np.ndarray:
    eps = 1e-9 * max(basis.tf - basis.t0, 1.0)
    if np.any(ts < basis.t0 - eps) or np.any(ts > basis.tf + eps):
        bad = ts[(ts < basis.t0 - eps) | (ts > basis.tf + eps)][0]
        raise ValueError(f"evaluation time {bad} outside the spline domain [{basis.t0}, {basis.tf}]")
    return np.clip(ts, basis.t0, basis.tf)


def basis_matrix(basis: SplineBasis, ts, deriv: int = 0) -> np.ndarray:
    """Evaluate all basis functions (or a derivative) at the given times.

    Parameters
    ----------
    basis : SplineBasis
    ts : array_like
        Times inside [t0, tf]; values outside raise ValueError.
    deriv : int
        Derivative order, 0 <= deriv.

    Returns
    -------
    ndarray
        Matrix of shape (len(ts), n_ctrl); row j holds the deriv-th
        derivatives of every basis function at ts[j].
    """
    if deriv < 0:
        raise ValueError("derivative order must be nonnegative")
    ts = _clip_to_domain(basis, np.atleast_1d(np.asarray(ts, dtype=float)))
    knots, p = basis.knots, basis.degree
    n_pts = len(ts)
    n_slots = len(knots) - 1

    t = ts[:, None]
    lower, upper = knots[None, :-1], knots[None, 1:]
    level0 = np.where((lower <= t) & (t < upper), 1.0, 0.0)
    at_end = ts == basis.tf
    if np.any(at_end):
        left_limit = np.where((lower < t) & (t <= upper), 1.0, 0.0)
        level0[at_end] = left_limit[at_end]

    # zeroth-derivative triangle, levels[q] has shape (n_pts, n_slots - q)
    levels = [level0]
    for q in range(1, p + 1):
        size = n_slots - q
        den_a = knots[q : q + size] - knots[:size]
        den_b = knots[q + 1 : q + 1 + size] - knots[1 : 1 + size]
        with np.errstate(divide="ignore", invalid="ignore"):
            coef_a = np.where(den_a > 0.0, (ts[:, None] - knots[None, :size]) / den_a, 0.0)
            coef_b = np.where(
                den_b > 0.0, (knots[None, q + 1 : q + 1 + size] - ts[:, None]) / den_b, 0.0
            )
        prev = levels[-1]
        levels.append(coef_a * prev[:, :size] + coef_b * prev[:, 1 : 1 + size])

    if deriv == 0:
        return levels[p]
    if deriv > p:
        return np.zeros((n_pts, n_slots - p))

    # differentiate the triangle `deriv` times
    current = levels
    for order in range(1, deriv + 1):
        new_levels: list[np.ndarray | None] = [None] * (p + 1)
        for q in range(order, p + 1):
            size = n_slots - q
            den_a = knots[q : q + size] - knots[:size]
            den_b = knots[q + 1 : q + 1 + size] - knots[1 : 1 + size]
            prev = current[q - 1]
            term_a = np.where(den_a > 0.0, prev[:, :size] / np.where(den_a > 0.0, den_a, 1.0), 0.0)
            term_b = np.where(
                den_b > 0.0, prev[:, 1 : 1 + size] / np.where(den_b > 0.0, den_b, 1.0), 0.0
            )
            new_levels[q] = q * (term_a - term_b)
        current = new_levels
    return current[p]


@dataclass(frozen=True)
class AttitudeSpline:
    """Vector-valued spline for the attitude trajectory.

    Attributes
    ----------
    basis : SplineBasis
    control : ndarray
        Control points, shape (n_ctrl, 3).
    """

    basis: SplineBasis
    control: np.ndarray

    def __post_init__(self) -> None:
        control = np.asarray(self.control, dtype=float)
        if control.shape != (self.basis.n_ctrl, 3):
            raise ValueError(
                f"control points must have shape ({self.basis.n_ctrl}, 3), got {control.shape}"
            )
        object.__setattr__(self, "control", control)

    def evaluate(self, ts, deriv: int = 0) -> np.ndarray:
        """Curve value or derivative; (3,) for scalar t, (n, 3) for arrays."""
        scalar = np.isscalar(ts) or np.ndim(ts) == 0
        mat = basis_matrix(self.basis, ts, deriv)
        out = mat @ self.control
        return out[0] if scalar else out

    def sample(self, ts, derivs=(0, 1, 2)) -> tuple[np.ndarray, ...]:
        """Several derivative orders at once, each of shape (len(ts), 3)."""
        return tuple(basis_matrix(self.basis, ts, d) @ self.control for d in derivs)


def fit_control_points(
    basis: SplineBasis,
    node_times: np.ndarray,
    node_values: np.ndarray,
    start_derivs: tuple[np.ndarray, np.ndarray] | None = None,
    end_derivs: tuple[np.ndarray, np.ndarray] | None = None,
) -> np.ndarray:
    """Interpolating control points for node values plus boundary rates.

    The collocation rows are the curve value at every node together with the
    first and second derivative at both window ends; for the default degree
    this yields a square, nonsingular system.

    Parameters
    ----------
    basis : SplineBasis
    node_times : ndarray
        Grid nodes t_0 .. t_N, uniform over the basis window.
    node_values : ndarray
        Curve values at the nodes, shape (len(node_times), 3).
    start_derivs, end_derivs : tuple of two 3-vectors, optional
        First and second derivative at t_0 / t_N; zero when omitted.

    Returns
    -------
    ndarray
        Control points, shape (n_ctrl, 3).
    """
    node_times = np.asarray(node_times, dtype=float)
    node_values = np.asarray(node_values, dtype=float)
    if node_values.shape != (len(node_times), 3):
        raise ValueError(f"node values must be ({len(node_times)}, 3), got {node_values.shape}")
    d1_start, d2_start = start_derivs if start_derivs is not None else (np.zeros(3), np.zeros(3))
    d1_end, d2_end = end_derivs if end_derivs is not None else (np.zeros(3), np.zeros(3))

    n_rows = len(node_times) + 4
    if n_rows != basis.n_ctrl:
        raise ValueError(
            f"collocation system is not square: {n_rows} rows for {basis.n_ctrl} control points"
        )
    t0, tf = node_times[0], node_times[-1]
    rows = np.vstack(
        [
            basis_matrix(basis, [t0], 1),
            basis_matrix(basis, [t0], 2),
            basis_matrix(basis, node_times, 0),
            basis_matrix(basis, [tf], 1),
            basis_matrix(basis, [tf], 2),
        ]
    )
    rhs = np.vstack(
        [
            np.asarray(d1_start, dtype=float).reshape(1, 3),
            np.asarray(d2_start, dtype=float).reshape(1, 3),
            node_values,
            np.asarray(d1_end, dtype=float).reshape(1, 3),
            np.asarray(d2_end, dtype=float).reshape(1, 3),
        ]
    )
    return np.linalg.solve(rows, rhs)
