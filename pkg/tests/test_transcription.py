"""Transcription tests: stacking oracles, constraint audit, NLP jacobians."""

import numpy as np
import pytest

import proxops.attitude as attitude
from proxops.attitude import SpacecraftBody
from proxops.bspline import AttitudeSpline, fit_control_points
from proxops.orbital import RelativeState, TargetOrbit, propagate_impulsive, stm
from proxops.transcription import (
    CoupledPlan,
    LosRegion,
    PlanBoundary,
    PlanningGrid,
    PlanningScenario,
    ThrusterLayout,
    WheelLimits,
    assemble_nlp,
    attitude_basis,
    evaluate_plan,
    join_variables,
    plan_from_vector,
    split_variables,
    stack_F,
    stack_G,
    vector_from_plan,
)

ORBIT = TargetOrbit.from_periapsis_altitude(600e3, 0.1, np.pi / 4)

LAYOUT2 = ThrusterLayout(
    directions=[[0.0, 0.0, -1.0], [-1.0, 0.0, 0.0]],
    max_impulse=[0.5, 0.5],
)

LOS = LosRegion(c_y=1.0, c_z=1.0, y_0=2.5, z_0=2.5)


def small_scene(orbit=ORBIT, inertia=None):
    body = SpacecraftBody(
        inertia=np.diag([900.0, 800.0, 600.0]) if inertia is None else inertia,
    )
    return PlanningScenario(
        orbit=orbit, body=body, thrusters=LAYOUT2, los=LOS,
        wheels=WheelLimits(momentum_max=500.0, rate_max=20.0),
    )


def random_plan(scene, grid, rng, amplitude=0.3):
    """Feasible-by-construction impulses and a smooth attitude spline."""
    n_nodes = grid.n_intervals + 1
    u = rng.uniform(0.0, amplitude, size=(n_nodes, scene.thrusters.n_thrusters))
    basis = attitude_basis(grid, scene.spline_degree)
    values = 0.3 * rng.standard_normal((n_nodes, 3))
    control = fit_control_points(basis, grid.node_times, values)
    return CoupledPlan(impulses=u, attitude=AttitudeSpline(basis=basis, control=control))


def lvlh_impulses(plan, grid):
    """Node impulses as LVLH delta-v vectors for the propagation oracle."""
    sig = plan.attitude.evaluate(grid.node_times)
    rot = attitude.rotation_from_mrp(sig)
    dirs = np.einsum("nij,pi->npj", rot, LAYOUT2.directions)
    dv = np.einsum("npj,np->nj", dirs, plan.impulses)
    return [(t, dv[k]) for k, t in enumerate(grid.node_times)]


def test_stack_f_first_block_is_single_transition():
    grid = PlanningGrid(t_start=0.0, t_end=600.0, n_intervals=4, n_los=3, n_wheel=2)
    f_mat = stack_F(ORBIT, grid)
    first = stm(ORBIT, grid.los_times[0], 0.0)
    np.testing.assert_allclose(f_mat[:6], first, rtol=1e-12, atol=1e-15)


def test_stack_f_single_interval_single_check():
    grid = PlanningGrid(t_start=0.0, t_end=600.0, n_intervals=1, n_los=1, n_wheel=1)
    f_mat = stack_F(ORBIT, grid)
    assert f_mat.shape == (6, 6)
    np.testing.assert_allclose(f_mat, stm(ORBIT, 600.0, 0.0), rtol=1e-12, atol=1e-15)


def test_stack_f_propagates_like_stm():
    rng = np.random.default_rng(3)
    grid = PlanningGrid(t_start=50.0, t_end=700.0, n_intervals=5, n_los=2, n_wheel=2)
    f_mat = stack_F(ORBIT, grid)
    x0 = rng.standard_normal(6) * [100.0, 100.0, 100.0, 0.5, 0.5, 0.5]
    stacked = (f_mat @ x0).reshape(-1, 6)
    for row, t in enumerate(grid.los_times):
        np.testing.assert_allclose(
            stacked[row], stm(ORBIT, t, 50.0) @ x0, rtol=1e-10, atol=1e-10,
        )


def test_stack_g_causality():
    grid = PlanningGrid(t_start=0.0, t_end=600.0, n_intervals=3, n_los=2, n_wheel=2)
    sig = np.zeros((4, 3))
    g = stack_G(ORBIT, grid, LAYOUT2, sig)
    assert g.shape == (2, 6 * 6, 4)
    # first check time is t=100; columns for nodes 1..3 (t=200,400,600) are zero
    first_block = g[:, :6, :]
    np.testing.assert_array_equal(first_block[:, :, 1:], 0.0)
    assert np.any(first_block[:, :, 0] != 0.0)


def test_stack_g_matches_impulsive_propagation():
    grid = PlanningGrid(t_start=0.0, t_end=900.0, n_intervals=3, n_los=2, n_wheel=2)
    sig = np.zeros((4, 3))
    g = stack_G(ORBIT, grid, LAYOUT2, sig)
    # thruster 1 of LAYOUT2 points along -x in the body frame; with identity
    # attitude that is -x in LVLH
    amp = 0.4
    state0 = RelativeState(r=np.zeros(3), v=np.zeros(3))
    for row, t in enumerate(grid.los_times):
        expected = propagate_impulsive(
            ORBIT, state0, 0.0, [(0.0, amp * np.array([-1.0, 0.0, 0.0]))], t,
        ).as_vector()
        np.testing.assert_allclose(
            g[1, 6 * row : 6 * row + 6, 0] * amp, expected, rtol=1e-9, atol=1e-12,
        )


def test_evaluate_plan_zero_impulses_is_drift():
    grid = PlanningGrid(t_start=0.0, t_end=600.0, n_intervals=4, n_los=2, n_wheel=2)
    scene = small_scene()
    plan = random_plan(scene, grid, np.random.default_rng(10))
    plan = CoupledPlan(impulses=np.zeros_like(plan.impulses), attitude=plan.attitude)
    x0 = np.array([300.0, -150.0, -100.0, 0.5, 0.8, -0.3])
    x_s = evaluate_plan(ORBIT, grid, LAYOUT2, plan, x0)
    np.testing.assert_allclose(x_s, stack_F(ORBIT, grid) @ x0, rtol=1e-12)


def test_evaluate_plan_matches_propagation_oracle():
    grid = PlanningGrid(t_start=0.0, t_end=900.0, n_intervals=5, n_los=2, n_wheel=3)
    scene = small_scene()
    rng = np.random.default_rng(42)
    plan = random_plan(scene, grid, rng)
    x0 = np.array([400.0, -250.0, -200.0, 1.0, 1.0, -1.0])
    x_s = evaluate_plan(ORBIT, grid, LAYOUT2, plan, x0).reshape(-1, 6)

    impulses = lvlh_impulses(plan, grid)
    state0 = RelativeState(r=x0[:3], v=x0[3:])
    for row, t in enumerate(grid.los_times):
        active = [(tk, dv) for tk, dv in impulses if tk <= t + 1e-9]
        expected = propagate_impulsive(ORBIT, state0, 0.0, active, t).as_vector()
        err = np.linalg.norm(x_s[row] - expected) / (1.0 + np.linalg.norm(expected))
        assert err < 1e-9, f"row {row} at t={t}"


def test_terminal_row_is_final_state():
    grid = PlanningGrid(t_start=0.0, t_end=900.0, n_intervals=4, n_los=2, n_wheel=2)
    scene = small_scene()
    plan = random_plan(scene, grid, np.random.default_rng(5))
    x0 = np.array([350.0, 200.0, 200.0, 1.0, 1.0, -1.0])
    x_s = evaluate_plan(ORBIT, grid, LAYOUT2, plan, x0)
    impulses = lvlh_impulses(plan, grid)
    final = propagate_impulsive(
        ORBIT, RelativeState(r=x0[:3], v=x0[3:]), 0.0, impulses, 900.0,
    ).as_vector()
    np.testing.assert_allclose(x_s[-6:], final, rtol=1e-9, atol=1e-9)


def test_variable_round_trip():
    grid = PlanningGrid(t_start=0.0, t_end=600.0, n_intervals=3, n_los=2, n_wheel=2)
    scene = small_scene()
    plan = random_plan(scene, grid, np.random.default_rng(8))
    v = vector_from_plan(scene, plan)
    back = plan_from_vector(scene, grid, v)
    np.testing.assert_array_equal(back.impulses, plan.impulses)
    np.testing.assert_array_equal(back.attitude.control, plan.attitude.control)

    basis = attitude_basis(grid, scene.spline_degree)
    u, ctrl = split_variables(scene.thrusters, basis, v)
    np.testing.assert_array_equal(join_variables(u, ctrl), v)


def test_nlp_dimension_audit():
    grid = PlanningGrid(t_start=0.0, t_end=900.0, n_intervals=15, n_los=2, n_wheel=12)
    scene = small_scene()
    x0 = np.array([400.0, -250.0, -200.0, 1.0, 1.0, -1.0])
    boundary = PlanBoundary(
        x_target=[2.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        sigma_start=np.zeros(3), sigma_target=[0.1, 0.2, 0.3],
    )
    problem = assemble_nlp(scene, grid, x0, boundary)
    basis = attitude_basis(grid, scene.spline_degree)
    n_u = scene.thrusters.n_thrusters * (grid.n_intervals + 1)
    assert problem.n == n_u + 3 * basis.n_ctrl

    ev = problem.evaluate(np.zeros(problem.n))
    n_los_rows = 5 * grid.n_los * grid.n_intervals
    # each two-sided wheel bound contributes a pair of one-sided rows
    n_two_sided = 2 * 3 * (grid.n_wheel + 1) * grid.n_intervals
    assert ev.c_in.size == n_los_rows + 2 * n_two_sided
    assert ev.c_eq.size == 6 + 18
    assert ev.jac_in.shape == (ev.c_in.size, problem.n)
    assert ev.jac_eq.shape == (24, problem.n)
    # impulse boxes: zero floor, per-thruster cap
    assert np.all(problem.lb[:n_u] == 0.0)
    assert np.all(problem.ub[:n_u] == 0.5)


def test_nlp_objective_is_total_impulse():
    grid = PlanningGrid(t_start=0.0, t_end=600.0, n_intervals=3, n_los=2, n_wheel=2)
    scene = small_scene()
    boundary = PlanBoundary(
        x_target=np.zeros(6), sigma_start=np.zeros(3), sigma_target=np.zeros(3),
    )
    problem = assemble_nlp(scene, grid, np.zeros(6), boundary)
    rng = np.random.default_rng(2)
    v = rng.uniform(0.0, 0.4, size=problem.n)
    ev = problem.evaluate(v)
    n_u = scene.thrusters.n_thrusters * (grid.n_intervals + 1)
    assert ev.f == pytest.approx(float(np.sum(v[:n_u])), rel=1e-15)


def test_nlp_jacobians_match_finite_differences():
    grid = PlanningGrid(t_start=0.0, t_end=300.0, n_intervals=3, n_los=2, n_wheel=2)
    scene = small_scene(inertia=np.diag([12.0, 10.0, 8.0]))
    x0 = np.array([120.0, -50.0, -40.0, 0.4, 0.3, -0.2])
    boundary = PlanBoundary(
        x_target=[2.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        sigma_start=[0.05, -0.02, 0.1], sigma_target=[0.2, 0.1, -0.1],
    )
    problem = assemble_nlp(scene, grid, x0, boundary)

    rng = np.random.default_rng(77)
    v = np.concatenate([
        rng.uniform(0.05, 0.4, size=8),           # impulses, 2 thrusters x 4 nodes
        0.2 * rng.standard_normal(problem.n - 8),  # spline control points
    ])
    ev = problem.evaluate(v)
    h = 1e-6
    for col in range(problem.n):
        dv = np.zeros(problem.n)
        dv[col] = h
        plus = problem.evaluate(v + dv)
        minus = problem.evaluate(v - dv)
        fd_eq = (plus.c_eq - minus.c_eq) / (2 * h)
        fd_in = (plus.c_in - minus.c_in) / (2 * h)
        fd_f = (plus.f - minus.f) / (2 * h)
        assert np.max(
            np.abs(fd_eq - ev.jac_eq[:, col]) / (1.0 + np.abs(ev.jac_eq[:, col]))
        ) < 5e-5, f"c_eq jacobian column {col}"
        assert np.max(
            np.abs(fd_in - ev.jac_in[:, col]) / (1.0 + np.abs(ev.jac_in[:, col]))
        ) < 5e-5, f"c_in jacobian column {col}"
        assert abs(fd_f - ev.grad[col]) < 1e-9


def test_zero_impulse_plan_feasible_at_equilibrium():
    # along-track offset with zero velocity is an equilibrium on a circular
    # orbit; starting there with matching boundary attitude needs no impulses
    orbit = TargetOrbit.from_periapsis_altitude(600e3, 0.0, 0.0)
    grid = PlanningGrid(t_start=0.0, t_end=600.0, n_intervals=4, n_los=2, n_wheel=3)
    scene = small_scene(orbit=orbit)
    x_eq = np.array([2.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    sigma = np.array([0.1, 0.0, -0.05])
    boundary = PlanBoundary(x_target=x_eq, sigma_start=sigma, sigma_target=sigma)
    problem = assemble_nlp(scene, grid, x_eq, boundary)

    basis = attitude_basis(grid, scene.spline_degree)
    control = fit_control_points(
        basis, grid.node_times, np.tile(sigma, (grid.n_intervals + 1, 1)),
    )
    v = join_variables(np.zeros((2, grid.n_intervals + 1)), control)
    ev = problem.evaluate(v)
    assert ev.f == 0.0
    assert np.max(np.abs(ev.c_eq)) < 1e-8
    assert np.all(ev.c_in < 1e-9)


def test_layout_validation():
    with pytest.raises(ValueError):
        ThrusterLayout(directions=[[1.0, 1.0, 0.0]], max_impulse=[1.0])
    with pytest.raises(ValueError):
        ThrusterLayout(directions=[[1.0, 0.0, 0.0]], max_impulse=[0.0])


def test_los_region_validation_and_membership():
    with pytest.raises(ValueError):
        LosRegion(c_y=0.0, c_z=1.0, y_0=1.0, z_0=1.0)
    region = LosRegion(c_y=1.0, c_z=1.0, y_0=2.5, z_0=2.5)
    inside = np.array([10.0, 5.0, 5.0, 0.0, 0.0, 0.0])
    outside = np.array([-1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    assert region.contains(inside)
    assert not region.contains(outside)


def test_grid_times_follow_index_formulas():
    grid = PlanningGrid(t_start=10.0, t_end=130.0, n_intervals=3, n_los=2, n_wheel=4)
    t = grid.interval
    assert t == pytest.approx(40.0)
    np.testing.assert_allclose(grid.node_times, [10.0, 50.0, 90.0, 130.0])
    expected_los = [
        10.0 + (k - 1) * t + ell * t / 2
        for k in (1, 2, 3) for ell in (1, 2)
    ]
    np.testing.assert_allclose(grid.los_times, expected_los)
    expected_wheel = [
        10.0 + (k - 1) * t + m * t / 4
        for k in (1, 2, 3) for m in range(5)
    ]
    np.testing.assert_allclose(grid.wheel_times, expected_wheel)
    with pytest.raises(ValueError):
        PlanningGrid(t_start=0.0, t_end=0.0, n_intervals=1, n_los=1, n_wheel=1)
