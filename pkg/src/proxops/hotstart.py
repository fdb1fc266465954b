"""LP warm start: an idealized-thruster relaxation and its conversion into
an initial guess for the coupled planner.

The relaxation treats the vehicle as able to thrust along any LVLH axis at
every node (three signed components, split into nonnegative pairs) with a
conservative per-component cap, keeps the line-of-sight and terminal rows,
and pins the first and last impulse directions to the ones the boundary
attitudes can actually deliver. The conversion then loads each node's
delta-v norm onto the strongest thruster and builds node attitudes that
point that thruster along the planned directions, swinging between firings
along minimal-angle rotations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import attitude
from .bspline import AttitudeSpline, fit_control_points
from .orbital import TargetOrbit
from .solvers import INFEASIBLE, OPTIMAL, LpProblem, solve_lp
from .transcription import (
    CoupledPlan,
    LosRegion,
    PlanBoundary,
    PlanningGrid,
    ThrusterLayout,
    _input_blocks,
    attitude_basis,
    stack_F,
)

_FIRE_TOL = 1e-9
_AXIS_TOL = 1e-10


class PlanningInfeasibleError(RuntimeError):
    """The relaxed planning LP has no feasible point."""


@dataclass(frozen=True)
class LpPlan:
    """Idealized node impulses in LVLH components, plus the LP cost."""

    impulses: np.ndarray  # (n_nodes, 3) signed delta-v components
    objective: float

    def __post_init__(self):
        u = np.asarray(self.impulses, dtype=float)
        if u.ndim != 2 or u.shape[1] != 3:
            raise ValueError("impulses must be (n_nodes, 3)")
        object.__setattr__(self, "impulses", u)

    @property
    def cost(self) -> float:
        """Total one-norm of the node impulses."""
        return float(np.sum(np.abs(self.impulses)))


def _orthogonal_complement(d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Two unit vectors spanning the plane orthogonal to unit vector d."""
    e = np.zeros(3)
    e[int(np.argmin(np.abs(d)))] = 1.0
    p1 = np.cross(d, e)
    p1 /= np.linalg.norm(p1)
    return p1, np.cross(d, p1)


def _primary_direction(layout: ThrusterLayout, sigma: np.ndarray) -> np.ndarray:
    """LVLH direction of the strongest thruster at attitude sigma."""
    p_star = int(np.argmax(layout.max_impulse))
    return attitude.rotation_from_mrp(np.asarray(sigma, float)).T @ layout.directions[p_star]


def solve_lp_hotstart(
    orbit: TargetOrbit,
    grid: PlanningGrid,
    x0: np.ndarray,
    boundary: PlanBoundary,
    layout: ThrusterLayout,
    los: LosRegion,
) -> LpPlan:
    """Minimum total one-norm impulse plan for the idealized vehicle.

    Variables are positive/negative splits of the three delta-v components
    at each node. Constraints: stacked line-of-sight rows, terminal state
    equality (final impulse included), per-component caps at the largest
    thruster bound divided by sqrt(3), and rank-2 rows forcing the first and
    last impulses parallel to the strongest thruster's direction at the
    boundary attitudes.

    Raises PlanningInfeasibleError when the LP is infeasible, RuntimeError
    on any other non-optimal solver outcome.
    """
    x0 = np.asarray(x0, dtype=float).reshape(6)
    n_nodes = grid.n_intervals + 1
    n_var = 6 * n_nodes
    cap = float(np.max(layout.max_impulse)) / np.sqrt(3.0)

    phib = _input_blocks(orbit, grid)
    fx0 = (stack_F(orbit, grid) @ x0).reshape(-1, 6)
    a_los, b_los = los.halfspaces()
    n_rows = phib.shape[0]

    # LOS rows over split variables: columns per node are (+u | -u) triples
    m_blocks = np.einsum("qi,rnik->rqnk", a_los, phib)
    a_in = np.stack([m_blocks, -m_blocks], axis=3).reshape(5 * n_rows, n_var)
    b_in = np.tile(b_los, n_rows) - (fx0 @ a_los.T).reshape(-1)

    terminal = np.stack([phib[-1], -phib[-1]], axis=2)  # (n, 6, 2, 3)
    a_term = terminal.transpose(1, 0, 2, 3).reshape(6, n_var)
    b_term = boundary.x_target - fx0[-1]

    d_start = _primary_direction(layout, boundary.sigma_start)
    d_end = _primary_direction(layout, boundary.sigma_target)
    a_dir = np.zeros((4, n_var))
    b_dir = np.zeros(4)
    for j, p in enumerate(_orthogonal_complement(d_start)):
        a_dir[j, 0:3] = p
        a_dir[j, 3:6] = -p
    for j, p in enumerate(_orthogonal_complement(d_end)):
        a_dir[2 + j, n_var - 6 : n_var - 3] = p
        a_dir[2 + j, n_var - 3 : n_var] = -p

    problem = LpProblem(
        c=np.ones(n_var),
        a_eq=np.vstack([a_term, a_dir]), b_eq=np.concatenate([b_term, b_dir]),
        a_in=a_in, b_in=b_in,
        lb=np.zeros(n_var), ub=np.full(n_var, cap),
    )
    res = solve_lp(problem)
    if res.status == INFEASIBLE:
        raise PlanningInfeasibleError(
            "relaxed impulse LP is infeasible for this scenario"
        )
    if res.status != OPTIMAL:
        raise RuntimeError(f"impulse LP did not converge: {res.status} {res.message}")

    split = res.x.reshape(n_nodes, 2, 3)
    return LpPlan(impulses=split[:, 0, :] - split[:, 1, :], objective=res.objective)


def _geodesic_nodes(sigma_base, sigma_rot_full, count):
    """MRP waypoints composing scaled fractions of one rotation onto a base.

    sigma_rot_full encodes the complete relative rotation; returns `count`
    attitudes at fractions 1/count .. 1 of its angle.
    """
    norm = float(np.linalg.norm(sigma_rot_full))
    out = np.empty((count, 3))
    if norm < 1e-14:
        out[:] = sigma_base
        return out
    axis = sigma_rot_full / norm
    angle = 4.0 * np.arctan(norm)
    for j in range(count):
        frac = (j + 1) / count
        sigma_rot = axis * np.tan(frac * angle / 4.0)
        assert np.linalg.norm(sigma_rot) <= 1.0 + 1e-9, "rotation leaves the principal MRP set"
        out[j] = attitude.mrp_compose(sigma_base, sigma_rot)
    return out


def _rotation_between(z_prev, z_next, sigma_base):
    """Body-frame MRP of the minimal rotation taking direction z_prev to
    z_next (both LVLH), expressed for composition onto sigma_base."""
    cross = np.cross(z_prev, z_next)
    norm = float(np.linalg.norm(cross))
    cos_t = float(np.clip(np.dot(z_prev, z_next), -1.0, 1.0))
    theta = float(np.arccos(cos_t))
    if norm < _AXIS_TOL:
        if cos_t > 0.0:
            return np.zeros(3)
        # antiparallel: any orthogonal axis works; pick deterministically
        axis_lvlh, _ = _orthogonal_complement(z_prev)
    else:
        axis_lvlh = cross / norm
    axis_body = attitude.rotation_from_mrp(sigma_base) @ axis_lvlh
    return axis_body * np.tan(theta / 4.0)


def guess_node_attitudes(
    lp_plan: LpPlan,
    layout: ThrusterLayout,
    sigma_start: np.ndarray,
    sigma_target: np.ndarray,
    grid: PlanningGrid,
) -> np.ndarray:
    """Node attitude waypoints aligning the strongest thruster with the
    planned impulse directions.

    Between consecutive firings the attitude sweeps the minimal rotation
    carrying the previous thrust direction onto the next one, uniformly in
    angle over the intervening nodes. Nodes before the first firing hold the
    initial attitude; after the last interior firing the attitude blends
    along the relative rotation to the target attitude, which the final node
    takes exactly.
    """
    sigma_start = np.asarray(sigma_start, dtype=float).reshape(3)
    sigma_target = np.asarray(sigma_target, dtype=float).reshape(3)
    u_vec = lp_plan.impulses
    n_nodes = grid.n_intervals + 1
    if u_vec.shape[0] != n_nodes:
        raise ValueError("plan node count does not match the grid")
    norms = np.linalg.norm(u_vec, axis=1)

    sig = np.empty((n_nodes, 3))
    sig[0] = sigma_start
    k_base = 0
    sigma_base = sigma_start
    z_prev = _primary_direction(layout, sigma_start)
    if norms[0] > _FIRE_TOL:
        z_prev = u_vec[0] / norms[0]

    interior = [k for k in range(1, n_nodes - 1) if norms[k] > _FIRE_TOL]
    for k_star in interior:
        z_next = u_vec[k_star] / norms[k_star]
        rot = _rotation_between(z_prev, z_next, sigma_base)
        sig[k_base + 1 : k_star + 1] = _geodesic_nodes(sigma_base, rot, k_star - k_base)
        sigma_base = sig[k_star]
        z_prev = z_next
        k_base = k_star

    if k_base < n_nodes - 1:
        r_rel = attitude.rotation_from_mrp(sigma_target) @ attitude.rotation_from_mrp(
            sigma_base
        ).T
        rot = attitude.mrp_from_dcm(r_rel)
        sig[k_base + 1 :] = _geodesic_nodes(sigma_base, rot, n_nodes - 1 - k_base)
    sig[-1] = sigma_target
    return sig


def lp_to_nlp_guess(
    lp_plan: LpPlan,
    layout: ThrusterLayout,
    sigma_start: np.ndarray,
    sigma_target: np.ndarray,
    grid: PlanningGrid,
    spline_degree: int = 5,
) -> CoupledPlan:
    """Convert the relaxed plan into a coupled-plan initial guess.

    Each node's delta-v norm is assigned to the strongest thruster (others
    zero); the attitude spline interpolates the waypoints from
    guess_node_attitudes with zero boundary rates.
    """
    norms = np.linalg.norm(lp_plan.impulses, axis=1)
    n_nodes = grid.n_intervals + 1
    amplitudes = np.zeros((n_nodes, layout.n_thrusters))
    amplitudes[:, int(np.argmax(layout.max_impulse))] = norms

    sig_nodes = guess_node_attitudes(lp_plan, layout, sigma_start, sigma_target, grid)
    basis = attitude_basis(grid, spline_degree)
    control = fit_control_points(basis, grid.node_times, sig_nodes)
    return CoupledPlan(
        impulses=amplitudes,
        attitude=AttitudeSpline(basis=basis, control=control),
    )
