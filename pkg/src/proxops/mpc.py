"""Closed-loop guidance: receding-horizon QP corrections around the plan.

Each control interval the nominal plan is refit onto the window sliding one
node forward (the tail holds the target attitude with zero rates and zero
impulses), the coupled transition is linearized around it, and a QP solves
for small increments of the impulse amplitudes and spline control points.
Terminal conditions enter as quadratic costs rather than constraints so the
problem stays feasible under dispersions; measured attitude is folded back
in through equality rows pinning the updated spline at the window start.

The loop driver is plant-agnostic: anything exposing measure /
apply_impulses / fly / history can stand in for the vehicle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import attitude
from .attitude import SpacecraftBody
from .bspline import AttitudeSpline, SplineBasis, basis_matrix, fit_control_points
from .orbital import TargetOrbit, epoch_table, solve_kepler
from .solvers import OPTIMAL, QpProblem, SolveResult, solve_qp
from .transcription import (
    CoupledPlan,
    PlanBoundary,
    PlanningGrid,
    PlanningScenario,
    ThrusterLayout,
    _input_blocks,
    stack_F,
)


@dataclass(frozen=True)
class TerminalWeights:
    """Relative cost of the terminal conditions against fuel.

    The position and velocity residuals are weighted through block
    selectors so each receives its own scalar; attitude value and rate
    terms carry plain identity weighting, the rate scaled by the square of
    the control interval to keep its magnitude comparable.
    """

    gamma_x: float = 10.0
    gamma_v: float = 5.0
    gamma_sigma: float = 2.0
    gamma_omega: float = 1.0

    def __post_init__(self):
        for name in ("gamma_x", "gamma_v", "gamma_sigma", "gamma_omega"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")

    @property
    def q_x(self) -> np.ndarray:
        """Selector picking the position block of a six-state."""
        return np.diag([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])

    @property
    def q_v(self) -> np.ndarray:
        """Selector picking the velocity block of a six-state."""
        return np.diag([0.0, 0.0, 0.0, 1.0, 1.0, 1.0])


@dataclass(frozen=True)
class MpcOptions:
    """Shaping knobs for the per-step QP.

    du_max_scale bounds each amplitude increment to a fraction of the
    thruster cap; da_max boxes every control-point increment per component
    and must stay small enough for the first-order rotation sensitivity to
    hold. qp_damping is a proximal weight on the increments: it makes the
    quadratic cost, which is only positive semidefinite on the fuel
    directions, strictly convex, and keeps the unconstrained minimizer the
    dual iteration starts from within a few trust radii instead of
    diverging along the flat directions. terminal_final_node_only switches
    the terminal sums from every penalized node in the window to just the
    last one.
    """

    du_max_scale: float = 0.2
    da_max: float = 0.02
    qp_damping: float = 0.1
    terminal_final_node_only: bool = False
    qp_max_iter: int | None = None

    def __post_init__(self):
        if self.du_max_scale <= 0.0 or self.da_max <= 0.0:
            raise ValueError("trust-region boxes must be positive")
        if self.qp_damping <= 0.0:
            raise ValueError("qp_damping must be positive")


@dataclass(frozen=True)
class MpcSetup:
    """Static problem data shared by every step of a closed-loop run."""

    scene: PlanningScenario
    grid: PlanningGrid
    boundary: PlanBoundary
    options: MpcOptions = field(default_factory=MpcOptions)


@dataclass(frozen=True)
class MpcStepState:
    """One step's inputs: measurements plus the plan shifted to its window.

    The plan must live on the window starting at node `step` of the base
    grid; x_meas is the translational state just before the impulse at the
    window start fires.
    """

    step: int
    x_meas: np.ndarray
    sigma_meas: np.ndarray
    sigma_rate_meas: np.ndarray
    sigma_acc_meas: np.ndarray
    plan: CoupledPlan

    def __post_init__(self):
        if self.step < 1:
            raise ValueError("step index starts at 1")
        object.__setattr__(self, "x_meas", np.asarray(self.x_meas, dtype=float).reshape(6))
        for name in ("sigma_meas", "sigma_rate_meas", "sigma_acc_meas"):
            object.__setattr__(
                self, name, np.asarray(getattr(self, name), dtype=float).reshape(3)
            )


@dataclass(frozen=True)
class PlantMeasurement:
    """Vehicle state sample: relative translation plus rigid-body attitude."""

    t: float
    x: np.ndarray
    sigma: np.ndarray
    omega: np.ndarray
    h_rw: np.ndarray


@dataclass
class ClosedLoopTrace:
    """Everything a closed-loop run produced.

    commanded holds the executed per-thruster amplitudes node by node (the
    entry at node 0 is the open-loop plan's); applied_dv the realized
    velocity increments in local orbital axes. qp_status has one entry per
    feedback step; du_inf / da_inf record the update magnitudes actually
    taken (zero on fallback steps). history_t / history_state sample the
    plant's fine-grained state [x(6), sigma(3), omega(3), h_rw(3)].
    """

    node_times: np.ndarray
    commanded: np.ndarray
    applied_dv: np.ndarray
    qp_status: list[str]
    qp_iterations: np.ndarray
    du_inf: np.ndarray
    da_inf: np.ndarray
    history_t: np.ndarray
    history_state: np.ndarray
    terminal_x: np.ndarray
    terminal_sigma: np.ndarray
    terminal_omega_rel: np.ndarray
    terminal_h_rw: np.ndarray

    @property
    def cost(self) -> float:
        """Total commanded impulse (the closed-loop fuel figure)."""
        return float(np.sum(self.commanded))

    @property
    def feasible_fraction(self) -> float:
        ok = sum(1 for s in self.qp_status if s == OPTIMAL)
        return ok / len(self.qp_status) if self.qp_status else 1.0


def window_grid(grid: PlanningGrid, r: int) -> PlanningGrid:
    """Constraint grid for the horizon starting at node r of the base grid."""
    if r < 0 or r > grid.n_intervals:
        raise ValueError("window start outside the base grid")
    t = grid.interval
    start = grid.t_start + r * t
    return PlanningGrid(
        t_start=start,
        t_end=start + grid.n_intervals * t,
        n_intervals=grid.n_intervals,
        n_los=grid.n_los,
        n_wheel=grid.n_wheel,
    )


def _check_plan_window(plan: CoupledPlan, window: PlanningGrid, n_thrusters: int):
    basis = plan.attitude.basis
    tol = 1e-6 * window.interval
    if abs(basis.t0 - window.t_start) > tol or abs(basis.tf - window.t_end) > tol:
        raise ValueError(
            f"plan spline spans [{basis.t0}, {basis.tf}], window is "
            f"[{window.t_start}, {window.t_end}]"
        )
    if plan.impulses.shape != (window.n_intervals + 1, n_thrusters):
        raise ValueError("impulse table does not match the window nodes")


def shift_plan(grid: PlanningGrid, boundary: PlanBoundary, plan: CoupledPlan, r: int) -> CoupledPlan:
    """Refit a plan from the window starting at node r-1 onto the next one.

    Node values carry over (the spline is collocated on them exactly) up to
    the rendezvous node; from there on the nodes hold the target attitude
    exactly, so interpolation wiggle does not compound across shifts, and
    the new window ends at rest. Impulses shift one slot; the executed one
    drops off the front and the tail node starts at zero.
    """
    if r < 1:
        raise ValueError("shift targets feedback steps, r >= 1")
    prev = window_grid(grid, r - 1)
    new = window_grid(grid, r)
    basis = plan.attitude.basis
    _check_plan_window(plan, prev, plan.impulses.shape[1])

    nodes = new.node_times
    arrival = new.n_intervals - r
    values = np.empty((nodes.size, 3))
    values[:-1] = plan.attitude.evaluate(nodes[:-1])
    values[max(arrival, 1) :] = boundary.sigma_target
    start = (
        plan.attitude.evaluate(nodes[:1], deriv=1)[0],
        plan.attitude.evaluate(nodes[:1], deriv=2)[0],
    )
    new_basis = SplineBasis.for_window(new.t_start, new.t_end, new.n_intervals, basis.degree)
    control = fit_control_points(new_basis, nodes, values, start_derivs=start)

    impulses = np.vstack([plan.impulses[1:], np.zeros((1, plan.impulses.shape[1]))])
    return CoupledPlan(impulses=impulses, attitude=AttitudeSpline(basis=new_basis, control=control))


def linearize_rotation_sensitivity(
    layout: ThrusterLayout,
    spline: AttitudeSpline,
    grid: PlanningGrid,
    node_index: int,
    ctrl_index: int,
    thruster: int = 0,
) -> np.ndarray:
    """Derivative of one node's thrust direction w.r.t. one control point.

    Returns the 3x3 block d(R^T(sigma(t_i)) w_p) / d a_j: the direction
    sensitivity at the node chained through the basis value of control
    point j there. Zero whenever the node lies outside the control point's
    support.
    """
    t_i = grid.node_times[node_index]
    b_val = basis_matrix(spline.basis, np.array([t_i]))[0, ctrl_index]
    if b_val == 0.0:
        return np.zeros((3, 3))
    sigma = spline.evaluate(np.array([t_i]))[0]
    w_p = layout.directions[thruster]
    return attitude.drotT_w_dmrp(sigma, w_p) * b_val


def stack_H(
    orbit: TargetOrbit,
    grid: PlanningGrid,
    layout: ThrusterLayout,
    plan: CoupledPlan,
    r: int = 0,
) -> np.ndarray:
    """Attitude sensitivity of the stacked states, one matrix per thruster.

    Entry block (row time, control point) of matrix p is the causal sum of
    transition blocks times the thrust-direction derivative at each firing
    node, weighted by that node's impulse amplitude. Shape
    (n_thrusters, 6 * n_los_points, 3 * n_ctrl); flattened column order
    matches control points raveled point-major.
    """
    window = window_grid(grid, r)
    _check_plan_window(plan, window, layout.n_thrusters)
    basis = plan.attitude.basis
    nodes = window.node_times
    sig_nodes = plan.attitude.evaluate(nodes)
    phib = _input_blocks(orbit, window)
    b0 = basis_matrix(basis, nodes)
    # direction derivatives d(R^T w_p)/d sigma at every node, (n_T, n, 3, 3)
    dr = attitude.drotation_dmrp(sig_nodes)
    ddirs = np.einsum("nkij,pi->pnjk", dr, layout.directions)
    u = plan.impulses.T
    h = np.einsum("rnik,pnkm,pn,nc->pricm", phib, ddirs, u, b0)
    n_pts = phib.shape[0]
    return h.reshape(layout.n_thrusters, 6 * n_pts, 3 * basis.n_ctrl)


def _penalized_nodes(n_intervals: int, r: int, final_only: bool) -> list[int]:
    """Window node indices carrying terminal costs at feedback step r.

    These are the horizon nodes at or beyond the arrival time: window slots
    n_intervals - r + k for k = max(0, r - n_intervals) .. r, dropping any
    that fall at or before the window start (their states are data, not
    decisions).
    """
    k_lo = max(0, r - n_intervals)
    slots = [n_intervals - r + k for k in range(k_lo, r + 1)]
    slots = [s for s in slots if 1 <= s <= n_intervals]
    if final_only and slots:
        slots = slots[-1:]
    return slots


def assemble_qp(
    step_state: MpcStepState,
    setup: MpcSetup,
    weights: TerminalWeights,
) -> QpProblem:
    """Quadratic correction problem around the step's nominal plan.

    Variables are the amplitude increments (thruster-major, one slot per
    window node) followed by the control-point increments (point-major).
    The objective prices added fuel linearly and the terminal residuals
    quadratically; constraints keep the corrected plan inside the approach
    corridor and wheel envelope to first order, re-anchor the spline on the
    measured attitude, and box every increment. The nominal plan's own
    terminal cost is a constant and is left out of the objective.
    """
    scene, grid, boundary = setup.scene, setup.grid, setup.boundary
    opts = setup.options
    orbit, body, layout = scene.orbit, scene.body, scene.thrusters
    r = step_state.step
    n_p = grid.n_intervals
    if r > n_p:
        raise ValueError("step index beyond the planning horizon")
    window = window_grid(grid, r)
    plan = step_state.plan
    _check_plan_window(plan, window, layout.n_thrusters)

    basis = plan.attitude.basis
    n_t = layout.n_thrusters
    n_nodes = n_p + 1
    n_u = n_t * n_nodes
    n_c = basis.n_ctrl
    n = n_u + 3 * n_c

    nodes = window.node_times
    sig_nodes = plan.attitude.evaluate(nodes)
    rot = attitude.rotation_from_mrp(sig_nodes)
    dirs = np.einsum("nij,pi->pnj", rot, layout.directions)
    phib = _input_blocks(orbit, window)
    n_pts = phib.shape[0]
    u = plan.impulses.T

    x_rows = (stack_F(orbit, window) @ step_state.x_meas).reshape(-1, 6)
    x_rows = x_rows + np.einsum("rnik,pnk,pn->ri", phib, dirs, u)
    jx_u = np.einsum("rnik,pnk->ripn", phib, dirs).reshape(n_pts, 6, n_u)
    jx_a = stack_H(orbit, grid, layout, plan, r).sum(axis=0).reshape(n_pts, 6, 3 * n_c)

    # corridor rows, linear in both increment blocks
    a_los, b_los = scene.los.halfspaces()
    a_in_los = np.concatenate(
        [
            np.einsum("qi,riu->rqu", a_los, jx_u),
            np.einsum("qi,ria->rqa", a_los, jx_a),
        ],
        axis=2,
    ).reshape(5 * n_pts, n)
    b_in_los = (b_los[None, :] - x_rows @ a_los.T).reshape(-1)

    # wheel envelope along the nominal spline, first order in the control points
    tw = window.wheel_times
    b_w = [basis_matrix(basis, tw, deriv=d) for d in range(3)]
    eps_w = epoch_table(orbit, tw)
    sw, sdw, sddw = (b_w[d] @ plan.attitude.control for d in range(3))
    h_rw = attitude.hrw_from_flat(body, sw, sdw, eps_w["nu_dot"])
    hd_rw = attitude.hrw_rate_from_flat(
        body, sw, sdw, sddw, eps_w["nu_dot"], eps_w["nu_ddot"]
    )
    fj = attitude.flat_jacobians(sw, sdw, sddw, eps_w["nu_dot"], eps_w["nu_ddot"])
    inertia = body.inertia
    h_skew = attitude.skew(body.h_total)
    dh_ds = -np.einsum("ij,wjk->wik", inertia, fj.domega_dsigma)
    dh_dsd = -np.einsum("ij,wjk->wik", inertia, fj.domega_dsigma_dot)
    dhd_ds = -np.einsum("ij,wjk->wik", inertia, fj.domega_dot_dsigma) + np.einsum(
        "ij,wjk->wik", h_skew, fj.domega_dsigma
    )
    dhd_dsd = -np.einsum("ij,wjk->wik", inertia, fj.domega_dot_dsigma_dot) + np.einsum(
        "ij,wjk->wik", h_skew, fj.domega_dsigma_dot
    )
    dhd_dsdd = -np.einsum("ij,wjk->wik", inertia, fj.domega_dot_dsigma_ddot)
    n_w = tw.size
    jh = (
        np.einsum("wim,wc->wicm", dh_ds, b_w[0])
        + np.einsum("wim,wc->wicm", dh_dsd, b_w[1])
    ).reshape(n_w, 3, 3 * n_c)
    jhd = (
        np.einsum("wim,wc->wicm", dhd_ds, b_w[0])
        + np.einsum("wim,wc->wicm", dhd_dsd, b_w[1])
        + np.einsum("wim,wc->wicm", dhd_dsdd, b_w[2])
    ).reshape(n_w, 3, 3 * n_c)
    h_max = scene.wheels.momentum_max
    hd_max = scene.wheels.rate_max
    a_in_wheel = np.zeros((12 * n_w, n))
    a_in_wheel[:, n_u:] = np.concatenate([jh, -jh, jhd, -jhd], axis=1).reshape(
        12 * n_w, 3 * n_c
    )
    b_in_wheel = np.concatenate(
        [h_max - h_rw, h_max + h_rw, hd_max - hd_rw, hd_max + hd_rw], axis=1
    ).reshape(-1)

    a_in = np.vstack([a_in_los, a_in_wheel])
    b_in = np.concatenate([b_in_los, b_in_wheel])

    # re-anchor the spline on the measured attitude at the window start
    a_eq = np.zeros((9, n))
    b_eq = np.empty(9)
    t_r = np.array([window.t_start])
    meas = (step_state.sigma_meas, step_state.sigma_rate_meas, step_state.sigma_acc_meas)
    for d in range(3):
        row = basis_matrix(basis, t_r, deriv=d)[0]
        a_eq[3 * d : 3 * d + 3, n_u:] = np.kron(row, np.eye(3))
        b_eq[3 * d : 3 * d + 3] = meas[d] - row @ plan.attitude.control

    # objective: linear fuel plus quadratic terminal residuals
    h_qp = np.zeros((n, n))
    c = np.concatenate([np.ones(n_u), np.zeros(3 * n_c)])
    t_interval = grid.interval
    for slot in _penalized_nodes(n_p, r, opts.terminal_final_node_only):
        row = slot * window.n_los - 1
        m = np.concatenate([jx_u[row], jx_a[row]], axis=1)
        x_err = x_rows[row] - boundary.x_target
        h_qp += 2.0 * weights.gamma_x * m.T @ weights.q_x @ m
        h_qp += 2.0 * weights.gamma_v * m.T @ weights.q_v @ m
        c += 2.0 * weights.gamma_x * m.T @ (weights.q_x @ x_err)
        c += 2.0 * weights.gamma_v * m.T @ (weights.q_v @ x_rows[row])

        t_node = nodes[slot : slot + 1]
        s_row = np.kron(basis_matrix(basis, t_node)[0], np.eye(3))
        d_row = np.kron(basis_matrix(basis, t_node, deriv=1)[0], np.eye(3))
        sig_err = sig_nodes[slot] - boundary.sigma_target
        sig_rate = plan.attitude.evaluate(t_node, deriv=1)[0]
        h_qp[n_u:, n_u:] += 2.0 * weights.gamma_sigma * s_row.T @ s_row
        h_qp[n_u:, n_u:] += 2.0 * weights.gamma_omega * t_interval**2 * d_row.T @ d_row
        c[n_u:] += 2.0 * weights.gamma_sigma * s_row.T @ sig_err
        c[n_u:] += 2.0 * weights.gamma_omega * t_interval**2 * d_row.T @ sig_rate
    h_qp = 0.5 * (h_qp + h_qp.T)
    h_qp[np.diag_indices(n)] += opts.qp_damping

    # increment boxes folded with the physical amplitude bounds
    du_max = opts.du_max_scale * np.repeat(layout.max_impulse, n_nodes)
    u_flat = u.reshape(-1)
    u_cap = np.repeat(layout.max_impulse, n_nodes)
    lb = np.concatenate([np.maximum(-u_flat, -du_max), np.full(3 * n_c, -opts.da_max)])
    ub = np.concatenate([np.minimum(u_cap - u_flat, du_max), np.full(3 * n_c, opts.da_max)])

    return QpProblem(h=h_qp, c=c, a_eq=a_eq, b_eq=b_eq, a_in=a_in, b_in=b_in, lb=lb, ub=ub)


def split_increments(
    layout: ThrusterLayout, basis: SplineBasis, delta: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Split a QP solution vector into (du node-major, dcontrol)."""
    n_c = basis.n_ctrl
    n_u = delta.size - 3 * n_c
    du = delta[:n_u].reshape(layout.n_thrusters, -1).T
    return du, delta[n_u:].reshape(n_c, 3)


def apply_increments(plan: CoupledPlan, du: np.ndarray, dcontrol: np.ndarray) -> CoupledPlan:
    """Corrected plan; amplitudes are clipped at zero against solver slack."""
    impulses = np.maximum(plan.impulses + du, 0.0)
    spline = AttitudeSpline(
        basis=plan.attitude.basis, control=plan.attitude.control + dcontrol
    )
    return CoupledPlan(impulses=impulses, attitude=spline)


def plan_terminal_cost(
    setup: MpcSetup,
    weights: TerminalWeights,
    r: int,
    plan: CoupledPlan,
    x_start: np.ndarray,
) -> float:
    """Terminal cost of a concrete plan flown from x_start over window r.

    Evaluates the same residuals the QP penalizes, but through the exact
    (nonlinear in the control points) plan propagation. Useful to compare
    a corrected plan against the nominal it was linearized from.
    """
    from .transcription import evaluate_plan

    grid, boundary = setup.grid, setup.boundary
    window = window_grid(grid, r)
    x_rows = evaluate_plan(setup.scene.orbit, window, setup.scene.thrusters, plan, x_start)
    x_rows = x_rows.reshape(-1, 6)
    total = 0.0
    t = grid.interval
    for slot in _penalized_nodes(grid.n_intervals, r, setup.options.terminal_final_node_only):
        x_node = x_rows[slot * window.n_los - 1]
        x_err = x_node - boundary.x_target
        sig = plan.attitude.evaluate(window.node_times[slot : slot + 1])[0]
        sig_rate = plan.attitude.evaluate(window.node_times[slot : slot + 1], deriv=1)[0]
        total += weights.gamma_x * x_err @ weights.q_x @ x_err
        total += weights.gamma_v * x_node @ weights.q_v @ x_node
        total += weights.gamma_sigma * np.sum((sig - boundary.sigma_target) ** 2)
        total += weights.gamma_omega * t**2 * np.sum(sig_rate**2)
    return float(total)


def _measured_flat_state(
    body: SpacecraftBody,
    orbit: TargetOrbit,
    meas: PlantMeasurement,
    prev_attitude: AttitudeSpline,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Attitude flat outputs (sigma, rate, acceleration) from a measurement.

    The acceleration needs the wheel torque acting just before the sample;
    that is the flatness command of the attitude profile flown on the
    previous interval, evaluated at the sample time.
    """
    ep = solve_kepler(orbit, meas.t)
    ts = np.array([meas.t])
    s_prev, sd_prev, sdd_prev = prev_attitude.sample(ts)
    hdot_prev = attitude.hrw_rate_from_flat(
        body, s_prev[0], sd_prev[0], sdd_prev[0], ep.nu_dot, ep.nu_ddot
    )
    sigma = np.asarray(meas.sigma, dtype=float)
    sigma_dot = attitude.sigma_dot_from_omega(sigma, meas.omega, ep.nu_dot)
    sigma_ddot = attitude.sigma_ddot_from_dynamics(
        body, sigma, meas.omega, meas.h_rw, hdot_prev, ep.nu_dot, ep.nu_ddot
    )
    return sigma, sigma_dot, sigma_ddot


def run_mpc(
    setup: MpcSetup,
    weights: TerminalWeights,
    plan: CoupledPlan,
    plant,
    rng: np.random.Generator | None = None,
) -> ClosedLoopTrace:
    """Fly the plan closed-loop, correcting it each interval with a QP.

    The opening impulse and attitude profile run open loop over the first
    interval. Every step after that measures the vehicle, refits the plan
    one node forward with a rest tail at the target attitude, solves the
    correction QP, and executes the updated front interval. A step whose QP
    does not come back optimal keeps the nominal controls and is recorded;
    the run always completes. The run ends at the arrival node right after
    its impulse, which is when the terminal metrics are read.

    The plant owns the truth model: `measure()` returns a PlantMeasurement
    taken before the node impulse, `apply_impulses(amplitudes, rng)`
    executes commanded per-thruster amplitudes (with actuation noise drawn
    from rng when given) and returns the realized velocity increment,
    `fly(t, attitude_spline)` advances to time t steering the wheels along
    the given profile, and `history()` hands back the fine-grained state
    record.
    """
    scene, grid = setup.scene, setup.grid
    n_p = grid.n_intervals
    n_t = scene.thrusters.n_thrusters
    _check_plan_window(plan, window_grid(grid, 0), n_t)

    node_times = grid.node_times
    commanded = np.zeros((n_p + 1, n_t))
    applied = np.zeros((n_p + 1, 3))
    statuses: list[str] = []
    iterations = np.zeros(n_p, dtype=int)
    du_inf = np.zeros(n_p)
    da_inf = np.zeros(n_p)

    current = plan
    commanded[0] = current.impulses[0]
    applied[0] = plant.apply_impulses(commanded[0], rng)
    plant.fly(node_times[1], current.attitude)

    for r in range(1, n_p + 1):
        meas = plant.measure()
        sigma, sigma_dot, sigma_ddot = _measured_flat_state(
            scene.body, scene.orbit, meas, current.attitude
        )
        shifted = shift_plan(grid, setup.boundary, current, r)
        state = MpcStepState(
            step=r,
            x_meas=meas.x,
            sigma_meas=sigma,
            sigma_rate_meas=sigma_dot,
            sigma_acc_meas=sigma_ddot,
            plan=shifted,
        )
        problem = assemble_qp(state, setup, weights)
        result: SolveResult = solve_qp(problem, max_iter=setup.options.qp_max_iter)
        statuses.append(result.status)
        iterations[r - 1] = result.iterations
        if result.status == OPTIMAL:
            du, dcontrol = split_increments(scene.thrusters, shifted.attitude.basis, result.x)
            du_inf[r - 1] = float(np.max(np.abs(du)))
            da_inf[r - 1] = float(np.max(np.abs(dcontrol)))
            current = apply_increments(shifted, du, dcontrol)
        else:
            current = shifted

        commanded[r] = current.impulses[0]
        applied[r] = plant.apply_impulses(commanded[r], rng)
        if r < n_p:
            plant.fly(node_times[r + 1], current.attitude)

    final = plant.measure()
    ep_f = solve_kepler(scene.orbit, final.t)
    hist_t, hist_state = plant.history()
    return ClosedLoopTrace(
        node_times=node_times,
        commanded=commanded,
        applied_dv=applied,
        qp_status=statuses,
        qp_iterations=iterations,
        du_inf=du_inf,
        da_inf=da_inf,
        history_t=np.asarray(hist_t, dtype=float),
        history_state=np.asarray(hist_state, dtype=float),
        terminal_x=np.asarray(final.x, dtype=float),
        terminal_sigma=np.asarray(final.sigma, dtype=float),
        terminal_omega_rel=attitude.omega_rel_lvlh(final.sigma, final.omega, ep_f.nu_dot),
        terminal_h_rw=np.asarray(final.h_rw, dtype=float),
    )
