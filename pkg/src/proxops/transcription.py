"""Discrete transcription of the coupled impulse/attitude planning problem.

Stacks state-transition blocks over the constraint grids, forms the
line-of-sight and wheel-capacity rows, and assembles the nonlinear program
whose variables are the impulse amplitudes at the maneuver nodes plus the
control points of the attitude spline. The stacked state is exact impulsive
propagation of the linearized relative dynamics; no collocation error is
introduced by the transcription itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import attitude
from .attitude import SpacecraftBody
from .bspline import AttitudeSpline, SplineBasis, basis_matrix, build_knots
from .orbital import B_INPUT, TargetOrbit, epoch_table, stm_factors
from .solvers import NlpEval, NlpProblem

_TIME_EPS = 1e-9


@dataclass(frozen=True)
class ThrusterLayout:
    """Body-fixed thruster directions and per-impulse amplitude caps."""

    directions: np.ndarray
    max_impulse: np.ndarray

    def __post_init__(self):
        dirs = np.atleast_2d(np.asarray(self.directions, dtype=float))
        caps = np.atleast_1d(np.asarray(self.max_impulse, dtype=float))
        if dirs.ndim != 2 or dirs.shape[1] != 3:
            raise ValueError("directions must be an (n, 3) array")
        if caps.shape != (dirs.shape[0],):
            raise ValueError("one amplitude cap per thruster required")
        norms = np.linalg.norm(dirs, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("thruster directions must be unit vectors")
        if np.any(caps <= 0.0):
            raise ValueError("amplitude caps must be positive")
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "max_impulse", caps)

    @property
    def n_thrusters(self) -> int:
        return self.directions.shape[0]


@dataclass(frozen=True)
class LosRegion:
    """Approach corridor: a four-sided cone about the +x axis plus x >= 0.

    Slopes c_y, c_z are dimensionless; y_0, z_0 widen the cone near the
    origin so the target itself is interior.
    """

    c_y: float
    c_z: float
    y_0: float
    z_0: float

    def __post_init__(self):
        if self.c_y <= 0.0 or self.c_z <= 0.0:
            raise ValueError("cone slopes must be positive")
        if self.y_0 < 0.0 or self.z_0 < 0.0:
            raise ValueError("cone offsets must be nonnegative")

    def halfspaces(self) -> tuple[np.ndarray, np.ndarray]:
        """Rows (a, b) with a @ state <= b on position coordinates."""
        a = np.zeros((5, 6))
        a[:, 0] = -1.0
        a[0, 1] = self.c_y
        a[1, 1] = -self.c_y
        a[2, 2] = self.c_z
        a[3, 2] = -self.c_z
        b = np.array([
            self.c_y * self.y_0,
            self.c_y * self.y_0,
            self.c_z * self.z_0,
            self.c_z * self.z_0,
            0.0,
        ])
        return a, b

    def contains(self, states: np.ndarray, tol: float = 0.0) -> np.ndarray:
        a, b = self.halfspaces()
        states = np.asarray(states, dtype=float)
        return np.all(states @ a.T <= b + tol, axis=-1)


@dataclass(frozen=True)
class WheelLimits:
    """Per-axis reaction wheel capacity: momentum (N m s) and torque (N m)."""

    momentum_max: float
    rate_max: float

    def __post_init__(self):
        if self.momentum_max <= 0.0 or self.rate_max <= 0.0:
            raise ValueError("wheel limits must be positive")


@dataclass(frozen=True)
class PlanningGrid:
    """Maneuver nodes plus the finer constraint-checking subgrids.

    Nodes are equally spaced: t_k = t_start + k * interval for k = 0..n.
    Each interval (t_{k-1}, t_k] carries n_los line-of-sight check times
    ending exactly at the node, and n_wheel + 1 wheel check times including
    both interval endpoints.
    """

    t_start: float
    t_end: float
    n_intervals: int
    n_los: int
    n_wheel: int

    def __post_init__(self):
        if self.t_end <= self.t_start:
            raise ValueError("t_end must exceed t_start")
        if self.n_intervals < 1 or self.n_los < 1 or self.n_wheel < 1:
            raise ValueError("grid counts must be at least 1")

    @property
    def interval(self) -> float:
        return (self.t_end - self.t_start) / self.n_intervals

    @property
    def node_times(self) -> np.ndarray:
        k = np.arange(self.n_intervals + 1)
        return self.t_start + k * self.interval

    @property
    def los_times(self) -> np.ndarray:
        t = self.interval
        out = np.empty(self.n_intervals * self.n_los)
        for k in range(1, self.n_intervals + 1):
            for ell in range(1, self.n_los + 1):
                out[(k - 1) * self.n_los + ell - 1] = (
                    self.t_start + (k - 1) * t + ell * t / self.n_los
                )
        return out

    @property
    def wheel_times(self) -> np.ndarray:
        t = self.interval
        out = np.empty(self.n_intervals * (self.n_wheel + 1))
        for k in range(1, self.n_intervals + 1):
            for m in range(self.n_wheel + 1):
                out[(k - 1) * (self.n_wheel + 1) + m] = (
                    self.t_start + (k - 1) * t + m * t / self.n_wheel
                )
        return out


@dataclass(frozen=True)
class PlanBoundary:
    """Rendezvous targets: terminal relative state and attitude endpoints.

    Attitude rates and accelerations are pinned to zero at both ends so the
    wheel momentum is stationary there.
    """

    x_target: np.ndarray
    sigma_start: np.ndarray
    sigma_target: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x_target, dtype=float).reshape(6)
        s0 = np.asarray(self.sigma_start, dtype=float).reshape(3)
        s1 = np.asarray(self.sigma_target, dtype=float).reshape(3)
        object.__setattr__(self, "x_target", x)
        object.__setattr__(self, "sigma_start", s0)
        object.__setattr__(self, "sigma_target", s1)


@dataclass(frozen=True)
class PlanningScenario:
    """Everything about the vehicle and corridor that the planner needs."""

    orbit: TargetOrbit
    body: SpacecraftBody
    thrusters: ThrusterLayout
    los: LosRegion
    wheels: WheelLimits
    spline_degree: int = 5


@dataclass(frozen=True)
class CoupledPlan:
    """Planned impulse amplitudes (node-major) and the attitude spline."""

    impulses: np.ndarray  # (n_nodes, n_thrusters), nonnegative
    attitude: AttitudeSpline

    def __post_init__(self):
        u = np.asarray(self.impulses, dtype=float)
        if u.ndim != 2:
            raise ValueError("impulses must be (n_nodes, n_thrusters)")
        object.__setattr__(self, "impulses", u)

    @property
    def total_impulse(self) -> float:
        return float(np.sum(self.impulses))


def attitude_basis(grid: PlanningGrid, degree: int = 5) -> SplineBasis:
    """Spline basis with interior knots at the maneuver nodes."""
    knots = build_knots(grid.t_start, grid.t_end, grid.n_intervals, degree)
    return SplineBasis(knots=knots, degree=degree)


def stack_F(orbit: TargetOrbit, grid: PlanningGrid) -> np.ndarray:
    """Stacked transition matrix: rows are Phi(t_kl, t_start) blocks."""
    times = np.concatenate([[grid.t_start], grid.los_times])
    y, y_inv = stm_factors(orbit, times)
    phi = y[1:] @ y_inv[0]
    return phi.reshape(-1, 6)


def _input_blocks(orbit: TargetOrbit, grid: PlanningGrid) -> np.ndarray:
    """Causal Phi(t_kl, t_i) B blocks, shape (n_los_pts, n_nodes, 6, 3).

    Blocks with t_i beyond the row time are zeroed; an impulse exactly at a
    check time is included (its transition block is the identity).
    """
    nodes = grid.node_times
    rows_t = grid.los_times
    y, y_inv = stm_factors(orbit, np.concatenate([nodes, rows_t]))
    yinv_b = y_inv[: nodes.size] @ B_INPUT
    phib = np.einsum("rij,njk->rnik", y[nodes.size :], yinv_b)
    mask = nodes[None, :] <= rows_t[:, None] + _TIME_EPS * grid.interval
    return phib * mask[:, :, None, None]


def stack_G(
    orbit: TargetOrbit,
    grid: PlanningGrid,
    layout: ThrusterLayout,
    node_attitudes: np.ndarray,
) -> np.ndarray:
    """Per-thruster stacked input matrices, shape (n_T, 6*n_pts, n_nodes).

    Column i of matrix p maps the amplitude of thruster p fired at node i
    into every stacked state, through the thrust direction R(sigma_i)^T w_p
    resolved in the local orbital frame.
    """
    node_attitudes = np.asarray(node_attitudes, dtype=float)
    if node_attitudes.shape != (grid.n_intervals + 1, 3):
        raise ValueError("node_attitudes must be (n_nodes, 3)")
    phib = _input_blocks(orbit, grid)
    rot = attitude.rotation_from_mrp(node_attitudes)
    dirs = np.einsum("nij,pi->pnj", rot, layout.directions)
    g = np.einsum("rnik,pnk->prin", phib, dirs)
    n_rows = phib.shape[0]
    return g.reshape(layout.n_thrusters, 6 * n_rows, grid.n_intervals + 1)


def evaluate_plan(
    orbit: TargetOrbit,
    grid: PlanningGrid,
    layout: ThrusterLayout,
    plan: CoupledPlan,
    x0: np.ndarray,
) -> np.ndarray:
    """Stacked relative states of a plan at every line-of-sight time."""
    x0 = np.asarray(x0, dtype=float).reshape(6)
    sig_nodes = plan.attitude.evaluate(grid.node_times)
    g = stack_G(orbit, grid, layout, sig_nodes)
    return stack_F(orbit, grid) @ x0 + np.einsum("prn,np->r", g, plan.impulses)


def split_variables(
    layout: ThrusterLayout, basis: SplineBasis, v: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Split the NLP vector into (u, control): amplitudes thruster-major,
    spline control points point-major."""
    n_t = layout.n_thrusters
    n_u = v.size - 3 * basis.n_ctrl
    if n_u <= 0 or n_u % n_t:
        raise ValueError("variable vector length inconsistent with layout")
    u = v[:n_u].reshape(n_t, n_u // n_t)
    control = v[n_u:].reshape(basis.n_ctrl, 3)
    return u, control


def join_variables(u: np.ndarray, control: np.ndarray) -> np.ndarray:
    return np.concatenate([np.ravel(u), np.ravel(control)])


def plan_from_vector(
    scene: PlanningScenario, grid: PlanningGrid, v: np.ndarray
) -> CoupledPlan:
    basis = attitude_basis(grid, scene.spline_degree)
    u, control = split_variables(scene.thrusters, basis, np.asarray(v, float))
    return CoupledPlan(
        impulses=u.T.copy(),
        attitude=AttitudeSpline(basis=basis, control=control),
    )


def vector_from_plan(scene: PlanningScenario, plan: CoupledPlan) -> np.ndarray:
    return join_variables(plan.impulses.T, plan.attitude.control)


def assemble_nlp(
    scene: PlanningScenario,
    grid: PlanningGrid,
    x0: np.ndarray,
    boundary: PlanBoundary,
) -> NlpProblem:
    """Build the coupled planning NLP.

    Variables: impulse amplitudes (thruster-major, n_T * n_nodes entries,
    boxed to [0, u_max]) followed by spline control points (point-major).
    Objective: total impulse. Inequalities: line-of-sight rows at every
    check time, then one-sided wheel momentum/torque rows (12 per wheel
    check time). Equalities: terminal state (6), then attitude boundary
    rows (18) pinning value/rate/acceleration at both ends. Every
    constraint row is equilibrated by a fixed factor so residuals and
    multipliers come out on comparable scales; the feasible set is
    unchanged.
    """
    orbit, body, layout = scene.orbit, scene.body, scene.thrusters
    x0 = np.asarray(x0, dtype=float).reshape(6)
    basis = attitude_basis(grid, scene.spline_degree)
    n_t = layout.n_thrusters
    n_nodes = grid.n_intervals + 1
    n_u = n_t * n_nodes
    n_ctrl = basis.n_ctrl
    n_var = n_u + 3 * n_ctrl

    phib = _input_blocks(orbit, grid)
    fx0 = (stack_F(orbit, grid) @ x0).reshape(-1, 6)
    n_rows = phib.shape[0]
    a_los, b_los = scene.los.halfspaces()

    b0_nodes = basis_matrix(basis, grid.node_times, deriv=0)
    tw = grid.wheel_times
    b_wheel = [basis_matrix(basis, tw, deriv=d) for d in range(3)]
    eps_w = epoch_table(orbit, tw)
    nu_dot_w, nu_ddot_w = eps_w["nu_dot"], eps_w["nu_ddot"]
    n_w = tw.size

    # constant attitude boundary rows: value, rate, acceleration at each end
    bnd_rows = np.zeros((18, 3 * n_ctrl))
    bnd_rhs = np.zeros(18)
    for block, (t_eval, deriv) in enumerate(
        [(grid.t_start, 0), (grid.t_start, 1), (grid.t_start, 2),
         (grid.t_end, 0), (grid.t_end, 1), (grid.t_end, 2)]
    ):
        row = basis_matrix(basis, np.array([t_eval]), deriv=deriv)[0]
        bnd_rows[3 * block : 3 * block + 3] = np.kron(row, np.eye(3))
    bnd_rhs[0:3] = boundary.sigma_start
    bnd_rhs[9:12] = boundary.sigma_target

    w_dirs = layout.directions
    inertia = body.inertia
    h_skew = attitude.skew(body.h_total)
    h_max = scene.wheels.momentum_max
    hd_max = scene.wheels.rate_max

    # Fixed row scalings, chosen at assembly time. Meter-scale transition
    # rows and MRP-scale spline rows differ by six orders of magnitude;
    # left unscaled, the small rows carry huge multipliers that stiffen
    # any merit function built from these constraints.
    bnd_scale = 1.0 / np.linalg.norm(bnd_rows, axis=1)
    term_scale = 1.0 / (1.0 + np.max(np.linalg.norm(phib[-1], axis=2), axis=0))
    eq_scale = np.concatenate([term_scale, bnd_scale])
    los_blocks = np.einsum("qi,rnik->rqnk", a_los, phib)
    los_scale = 1.0 / (
        1.0 + np.max(np.linalg.norm(los_blocks, axis=3), axis=2)
    ).reshape(-1)
    wheel_scale = np.tile(
        np.repeat([1.0 / (1.0 + h_max), 1.0 / (1.0 + hd_max)], 6), n_w
    )
    in_scale = np.concatenate([los_scale, wheel_scale])

    grad_const = np.concatenate([np.ones(n_u), np.zeros(3 * n_ctrl)])
    lb = np.concatenate([np.zeros(n_u), np.full(3 * n_ctrl, -np.inf)])
    ub = np.concatenate([
        np.repeat(layout.max_impulse, n_nodes), np.full(3 * n_ctrl, np.inf),
    ])

    m_in = 5 * n_rows + 12 * n_w

    def evaluate(v: np.ndarray) -> NlpEval:
        u = v[:n_u].reshape(n_t, n_nodes)
        a_flat = v[n_u:]
        ctrl = a_flat.reshape(n_ctrl, 3)

        sig_nodes = b0_nodes @ ctrl
        rot = attitude.rotation_from_mrp(sig_nodes)
        dirs = np.einsum("nij,pi->pnj", rot, w_dirs)
        x_s = fx0 + np.einsum("rnik,pnk,pn->ri", phib, dirs, u)

        # translational jacobians
        jx_u = np.einsum("rnik,pnk->ripn", phib, dirs).reshape(n_rows, 6, n_u)
        dr = attitude.drotation_dmrp(sig_nodes)
        ddirs = np.einsum("nkij,pi->pnjk", dr, w_dirs)
        m_blk = np.einsum("rnik,pnkm,pn->rnim", phib, ddirs, u)
        jx_a = np.einsum("rnim,nc->ricm", m_blk, b0_nodes).reshape(
            n_rows, 6, 3 * n_ctrl
        )

        # line of sight
        c_los = (x_s @ a_los.T - b_los).reshape(-1)
        j_los_u = np.einsum("qi,riu->rqu", a_los, jx_u).reshape(5 * n_rows, n_u)
        j_los_a = np.einsum("qi,ria->rqa", a_los, jx_a).reshape(5 * n_rows, -1)

        # wheel capacity along the spline
        sw = b_wheel[0] @ ctrl
        sdw = b_wheel[1] @ ctrl
        sddw = b_wheel[2] @ ctrl
        h_rw = attitude.hrw_from_flat(body, sw, sdw, nu_dot_w)
        hd_rw = attitude.hrw_rate_from_flat(body, sw, sdw, sddw, nu_dot_w, nu_ddot_w)
        fj = attitude.flat_jacobians(sw, sdw, sddw, nu_dot_w, nu_ddot_w)
        dh_ds = -np.einsum("ij,wjk->wik", inertia, fj.domega_dsigma)
        dh_dsd = -np.einsum("ij,wjk->wik", inertia, fj.domega_dsigma_dot)
        dhd_ds = (
            -np.einsum("ij,wjk->wik", inertia, fj.domega_dot_dsigma)
            + np.einsum("ij,wjk->wik", h_skew, fj.domega_dsigma)
        )
        dhd_dsd = (
            -np.einsum("ij,wjk->wik", inertia, fj.domega_dot_dsigma_dot)
            + np.einsum("ij,wjk->wik", h_skew, fj.domega_dsigma_dot)
        )
        dhd_dsdd = -np.einsum("ij,wjk->wik", inertia, fj.domega_dot_dsigma_ddot)

        jh = (
            np.einsum("wim,wc->wicm", dh_ds, b_wheel[0])
            + np.einsum("wim,wc->wicm", dh_dsd, b_wheel[1])
        ).reshape(n_w, 3, 3 * n_ctrl)
        jhd = (
            np.einsum("wim,wc->wicm", dhd_ds, b_wheel[0])
            + np.einsum("wim,wc->wicm", dhd_dsd, b_wheel[1])
            + np.einsum("wim,wc->wicm", dhd_dsdd, b_wheel[2])
        ).reshape(n_w, 3, 3 * n_ctrl)

        c_wheel = np.concatenate(
            [h_rw - h_max, -h_rw - h_max, hd_rw - hd_max, -hd_rw - hd_max],
            axis=1,
        ).reshape(-1)
        j_wheel_a = np.concatenate([jh, -jh, jhd, -jhd], axis=1).reshape(
            12 * n_w, 3 * n_ctrl
        )

        c_in = np.concatenate([c_los, c_wheel]) * in_scale
        jac_in = np.zeros((m_in, n_var))
        jac_in[: 5 * n_rows, :n_u] = j_los_u
        jac_in[: 5 * n_rows, n_u:] = j_los_a
        jac_in[5 * n_rows :, n_u:] = j_wheel_a
        jac_in *= in_scale[:, None]

        # terminal state plus attitude boundary equalities
        c_eq = np.concatenate([
            x_s[-1] - boundary.x_target, bnd_rows @ a_flat - bnd_rhs,
        ]) * eq_scale
        jac_eq = np.zeros((24, n_var))
        jac_eq[:6, :n_u] = jx_u[-1]
        jac_eq[:6, n_u:] = jx_a[-1]
        jac_eq[6:, n_u:] = bnd_rows
        jac_eq *= eq_scale[:, None]

        return NlpEval(
            f=float(np.sum(u)), grad=grad_const.copy(),
            c_eq=c_eq, jac_eq=jac_eq, c_in=c_in, jac_in=jac_in,
        )

    return NlpProblem(n=n_var, evaluate=evaluate, lb=lb, ub=ub)
