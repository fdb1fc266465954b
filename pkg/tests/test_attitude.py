"""Tests for MRP rotations, kinematics, and the flatness rate maps.

Oracles: the axis-angle (Rodrigues) rotation formula, finite differences
along smooth analytic attitude curves, and the defining kinematic identity
relating the DCM rate to the relative angular velocity.
"""

import math

import numpy as np
import pytest

from proxops import attitude as att
from proxops.attitude import (
    AttitudeState,
    FlatJacobians,
    MrpSingularityError,
    SpacecraftBody,
    dcm_to_euler313,
    euler313_to_dcm,
    flat_jacobians,
    hrw_from_flat,
    hrw_rate_from_flat,
    kinematics_matrix,
    kinematics_matrix_inverse,
    kinematics_matrix_rate,
    lvlh_angular_velocity,
    mrp_compose,
    mrp_from_dcm,
    omega_dot_from_flat,
    omega_from_flat,
    omega_rel_lvlh,
    rotation_from_mrp,
    rotation_rate_from_mrp,
    sigma_dot_from_omega,
    skew,
)
from proxops.orbital import TargetOrbit, solve_kepler

ORBIT = TargetOrbit.from_periapsis_altitude(600e3, 0.1, math.pi / 4, t0=0.0)
BODY = SpacecraftBody(inertia=np.diag([31e3, 31e3, 5e3]))


def rodrigues_passive(axis, angle):
    """Frame rotation DCM by `angle` about `axis` (components -> components)."""
    e = np.asarray(axis, dtype=float)
    e = e / np.linalg.norm(e)
    c, s = math.cos(angle), math.sin(angle)
    return c * np.eye(3) + (1.0 - c) * np.outer(e, e) - s * skew(e)


def smooth_curve(t):
    """Cubic MRP test curve with analytic first and second derivatives."""
    a = np.array([0.05, -0.1, 0.2])
    b = np.array([2.0e-3, -1.0e-3, 0.5e-3])
    c = np.array([-4.0e-6, 2.0e-6, 3.0e-6])
    d = np.array([5.0e-9, 1.0e-8, -2.0e-9])
    sigma = a + b * t + c * t**2 + d * t**3
    sigma_dot = b + 2.0 * c * t + 3.0 * d * t**2
    sigma_ddot = 2.0 * c + 6.0 * d * t
    return sigma, sigma_dot, sigma_ddot


# ---------------------------------------------------------------------------
# rotations


def test_rotation_identity_and_known_mrp():
    np.testing.assert_allclose(rotation_from_mrp(np.zeros(3)), np.eye(3), atol=1e-15)
    # |sigma| = 1 is a 180 deg rotation about the MRP direction
    np.testing.assert_allclose(
        rotation_from_mrp(np.array([0.0, 0.0, 1.0])), np.diag([-1.0, -1.0, 1.0]), atol=1e-14
    )


def test_rotation_matches_axis_angle_oracle():
    rng = np.random.default_rng(5)
    angles = list(rng.uniform(-math.pi, math.pi, size=15)) + [3.0, -4.0, 5.0]
    for angle in angles:
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        sigma = math.tan(angle / 4.0) * axis
        np.testing.assert_allclose(
            rotation_from_mrp(sigma), rodrigues_passive(axis, angle), atol=1e-12
        )


def test_rotation_is_orthonormal():
    rng = np.random.default_rng(6)
    sigmas = rng.uniform(-1.2, 1.2, size=(40, 3))
    rots = rotation_from_mrp(sigmas)
    np.testing.assert_allclose(
        rots @ np.swapaxes(rots, -1, -2), np.broadcast_to(np.eye(3), (40, 3, 3)), atol=1e-12
    )
    np.testing.assert_allclose(np.linalg.det(rots), np.ones(40), rtol=1e-12)


def test_rotation_broadcasts_like_scalar_calls():
    rng = np.random.default_rng(7)
    sigmas = rng.uniform(-0.8, 0.8, size=(4, 5, 3))
    batched = rotation_from_mrp(sigmas)
    assert batched.shape == (4, 5, 3, 3)
    for i in range(4):
        for j in range(5):
            np.testing.assert_array_equal(batched[i, j], rotation_from_mrp(sigmas[i, j]))


# ---------------------------------------------------------------------------
# kinematics matrix and rates along a curve


def test_kinematics_matrix_ties_mrp_rate_to_relative_rate():
    """sigma_dot = C(sigma) w_rel where w_rel comes from the DCM rate."""
    h = 0.05
    for t in [0.0, 40.0, 111.0]:
        sigma, sigma_dot, _ = smooth_curve(t)
        r_plus = rotation_from_mrp(smooth_curve(t + h)[0])
        r_minus = rotation_from_mrp(smooth_curve(t - h)[0])
        r_dot_fd = (r_plus - r_minus) / (2.0 * h)
        omega_skew = -r_dot_fd @ rotation_from_mrp(sigma).T
        w_rel = np.array([omega_skew[2, 1], omega_skew[0, 2], omega_skew[1, 0]])
        np.testing.assert_allclose(
            kinematics_matrix(sigma) @ w_rel, sigma_dot, rtol=1e-6, atol=1e-10
        )


def test_kinematics_matrix_inverse_closed_form():
    rng = np.random.default_rng(8)
    sigmas = rng.uniform(-1.0, 1.0, size=(25, 3))
    prod = kinematics_matrix_inverse(sigmas) @ kinematics_matrix(sigmas)
    np.testing.assert_allclose(prod, np.broadcast_to(np.eye(3), (25, 3, 3)), atol=1e-12)


def test_matrix_rates_match_finite_differences():
    h = 0.05
    for t in [10.0, 95.0]:
        sigma, sigma_dot, _ = smooth_curve(t)
        s_plus = smooth_curve(t + h)[0]
        s_minus = smooth_curve(t - h)[0]
        c_dot_fd = (kinematics_matrix(s_plus) - kinematics_matrix(s_minus)) / (2.0 * h)
        np.testing.assert_allclose(
            kinematics_matrix_rate(sigma, sigma_dot), c_dot_fd, rtol=1e-7, atol=1e-11
        )
        r_dot_fd = (rotation_from_mrp(s_plus) - rotation_from_mrp(s_minus)) / (2.0 * h)
        np.testing.assert_allclose(
            rotation_rate_from_mrp(sigma, sigma_dot), r_dot_fd, rtol=1e-5, atol=1e-9
        )


def test_rotation_rate_identity_with_relative_rate():
    """Rdot = -skew(C^-1 sigma_dot) R, the transport theorem for the DCM."""
    rng = np.random.default_rng(9)
    for _ in range(10):
        sigma = rng.uniform(-0.9, 0.9, size=3)
        sigma_dot = rng.normal(scale=0.01, size=3)
        w_rel = kinematics_matrix_inverse(sigma) @ sigma_dot
        expected = -skew(w_rel) @ rotation_from_mrp(sigma)
        np.testing.assert_allclose(
            rotation_rate_from_mrp(sigma, sigma_dot), expected, rtol=1e-10, atol=1e-12
        )


# ---------------------------------------------------------------------------
# composition and DCM conversions


def test_mrp_compose_matches_dcm_product():
    rng = np.random.default_rng(10)
    for _ in range(20):
        a = rng.uniform(-0.7, 0.7, size=3)
        b = rng.uniform(-0.7, 0.7, size=3)
        composed = mrp_compose(a, b)
        np.testing.assert_allclose(
            rotation_from_mrp(composed),
            rotation_from_mrp(b) @ rotation_from_mrp(a),
            atol=1e-11,
        )


def test_mrp_compose_identity_cases():
    sigma = np.array([0.3, -0.2, 0.5])
    np.testing.assert_allclose(mrp_compose(sigma, np.zeros(3)), sigma, atol=1e-15)
    np.testing.assert_allclose(mrp_compose(np.zeros(3), sigma), sigma, atol=1e-15)


def test_mrp_compose_raises_at_full_turn():
    # the two rotations below sum to 360 deg about the same axis
    with pytest.raises(MrpSingularityError):
        mrp_compose(np.array([2.0, 0.0, 0.0]), np.array([0.5, 0.0, 0.0]))


def test_mrp_from_dcm_round_trip():
    rng = np.random.default_rng(11)
    for _ in range(25):
        axis = rng.normal(size=3)
        angle = rng.uniform(-math.pi, math.pi)
        dcm = rodrigues_passive(axis, angle)
        sigma = mrp_from_dcm(dcm)
        assert np.linalg.norm(sigma) <= 1.0 + 1e-12
        np.testing.assert_allclose(rotation_from_mrp(sigma), dcm, atol=1e-11)


def test_mrp_from_dcm_handles_180_deg():
    for axis in [np.array([1.0, 0.0, 1.0]), np.array([0.0, 1.0, 0.0]), np.array([1.0, 1.0, 1.0])]:
        dcm = rodrigues_passive(axis, math.pi)
        sigma = mrp_from_dcm(dcm)
        assert np.linalg.norm(sigma) == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(rotation_from_mrp(sigma), dcm, atol=1e-11)
    np.testing.assert_allclose(mrp_from_dcm(np.eye(3)), np.zeros(3), atol=1e-15)


def test_euler313_known_square_angles():
    dcm = euler313_to_dcm(np.deg2rad([90.0, 90.0, 90.0]))
    expected = np.array([[0.0, 0.0, 1.0], [0.0, -1.0, 0.0], [1.0, 0.0, 0.0]])
    np.testing.assert_allclose(dcm, expected, atol=1e-15)
    sigma = mrp_from_dcm(dcm)
    np.testing.assert_allclose(sigma, [math.sqrt(2.0) / 2.0, 0.0, math.sqrt(2.0) / 2.0], atol=1e-12)


def test_euler313_round_trip():
    rng = np.random.default_rng(12)
    for _ in range(20):
        angles = np.array(
            [
                rng.uniform(-math.pi, math.pi),
                rng.uniform(0.05, math.pi - 0.05),
                rng.uniform(-math.pi, math.pi),
            ]
        )
        extracted = dcm_to_euler313(euler313_to_dcm(angles))
        np.testing.assert_allclose(extracted, angles, atol=1e-10)
    # degenerate middle angle: only the DCM needs to round trip
    for angles in [np.array([0.4, 0.0, 1.1]), np.array([-0.7, math.pi, 0.3])]:
        dcm = euler313_to_dcm(angles)
        np.testing.assert_allclose(euler313_to_dcm(dcm_to_euler313(dcm)), dcm, atol=1e-12)


# ---------------------------------------------------------------------------
# flatness maps


def test_lvlh_rate_points_against_momentum_axis():
    np.testing.assert_array_equal(lvlh_angular_velocity(0.002), [0.0, -0.002, 0.0])
    out = lvlh_angular_velocity(np.array([1.0, 2.0]))
    assert out.shape == (2, 3)
    np.testing.assert_array_equal(out[1], [0.0, -2.0, 0.0])


def test_aligned_attitude_rotates_with_the_frame():
    """sigma = 0 held: the body turns with LVLH, omega equals the frame rate."""
    ep = solve_kepler(ORBIT, 250.0)
    omega = omega_from_flat(np.zeros(3), np.zeros(3), ep.nu_dot)
    np.testing.assert_allclose(omega, [0.0, -ep.nu_dot, 0.0], rtol=1e-14)
    omega_dot = omega_dot_from_flat(np.zeros(3), np.zeros(3), np.zeros(3), ep.nu_dot, ep.nu_ddot)
    np.testing.assert_allclose(omega_dot, [0.0, -ep.nu_ddot, 0.0], rtol=1e-12)
    np.testing.assert_allclose(
        omega_rel_lvlh(np.zeros(3), omega, ep.nu_dot), np.zeros(3), atol=1e-18
    )


def test_omega_round_trips_through_sigma_dot():
    rng = np.random.default_rng(13)
    ep = solve_kepler(ORBIT, 420.0)
    for _ in range(10):
        sigma = rng.uniform(-0.8, 0.8, size=3)
        sigma_dot = rng.normal(scale=0.01, size=3)
        omega = omega_from_flat(sigma, sigma_dot, ep.nu_dot)
        np.testing.assert_allclose(
            sigma_dot_from_omega(sigma, omega, ep.nu_dot), sigma_dot, rtol=1e-10, atol=1e-14
        )


def test_omega_dot_matches_finite_difference_of_omega():
    """Differentiates through the attitude curve and the orbit rates together."""
    h = 0.1
    for t in [30.0, 333.0, 777.0]:
        sigma, sigma_dot, sigma_ddot = smooth_curve(t)
        ep = solve_kepler(ORBIT, t)

        def omega_at(tau):
            s, sd, _ = smooth_curve(tau)
            return omega_from_flat(s, sd, solve_kepler(ORBIT, tau).nu_dot)

        fd = (omega_at(t + h) - omega_at(t - h)) / (2.0 * h)
        analytic = omega_dot_from_flat(sigma, sigma_dot, sigma_ddot, ep.nu_dot, ep.nu_ddot)
        np.testing.assert_allclose(analytic, fd, rtol=1e-6, atol=1e-12)


def test_wheel_momentum_maps():
    sigma, sigma_dot, sigma_ddot = smooth_curve(50.0)
    ep = solve_kepler(ORBIT, 50.0)
    omega = omega_from_flat(sigma, sigma_dot, ep.nu_dot)
    omega_dot = omega_dot_from_flat(sigma, sigma_dot, sigma_ddot, ep.nu_dot, ep.nu_ddot)

    h_rw = hrw_from_flat(BODY, sigma, sigma_dot, ep.nu_dot)
    np.testing.assert_allclose(h_rw, -BODY.inertia @ omega, rtol=1e-14)
    h_rw_dot = hrw_rate_from_flat(BODY, sigma, sigma_dot, sigma_ddot, ep.nu_dot, ep.nu_ddot)
    np.testing.assert_allclose(h_rw_dot, -BODY.inertia @ omega_dot, rtol=1e-14)

    # nonzero stored momentum adds the gyroscopic coupling term
    body_bias = SpacecraftBody(inertia=BODY.inertia, h_total=[5.0, -2.0, 1.0])
    h_rw_dot_bias = hrw_rate_from_flat(body_bias, sigma, sigma_dot, sigma_ddot, ep.nu_dot, ep.nu_ddot)
    np.testing.assert_allclose(
        h_rw_dot_bias, -BODY.inertia @ omega_dot - np.cross(omega, body_bias.h_total), rtol=1e-13
    )


def test_total_momentum_is_preserved_along_curve():
    for t in np.linspace(0.0, 900.0, 31):
        sigma, sigma_dot, _ = smooth_curve(t)
        ep = solve_kepler(ORBIT, t)
        omega = omega_from_flat(sigma, sigma_dot, ep.nu_dot)
        h_rw = hrw_from_flat(BODY, sigma, sigma_dot, ep.nu_dot)
        np.testing.assert_allclose(BODY.inertia @ omega + h_rw, BODY.h_total, atol=1e-12)


def test_wheel_rate_matches_finite_difference_of_momentum():
    h = 0.1
    t = 140.0
    sigma, sigma_dot, sigma_ddot = smooth_curve(t)
    ep = solve_kepler(ORBIT, t)

    def h_rw_at(tau):
        s, sd, _ = smooth_curve(tau)
        return hrw_from_flat(BODY, s, sd, solve_kepler(ORBIT, tau).nu_dot)

    fd = (h_rw_at(t + h) - h_rw_at(t - h)) / (2.0 * h)
    analytic = hrw_rate_from_flat(BODY, sigma, sigma_dot, sigma_ddot, ep.nu_dot, ep.nu_ddot)
    np.testing.assert_allclose(analytic, fd, rtol=1e-6, atol=1e-10)


def test_sigma_ddot_round_trips_through_dynamics():
    # forward flatness maps produce (omega, h_rw, h_rw_dot); inverting the
    # Euler equation from those quantities must recover sigma_ddot exactly
    body_bias = SpacecraftBody(inertia=BODY.inertia, h_total=[4.0, 1.0, -2.0])
    for t in (15.0, 230.0, 610.0):
        sigma, sigma_dot, sigma_ddot = smooth_curve(t)
        ep = solve_kepler(ORBIT, t)
        omega = omega_from_flat(sigma, sigma_dot, ep.nu_dot)
        h_rw = hrw_from_flat(body_bias, sigma, sigma_dot, ep.nu_dot)
        h_rw_dot = hrw_rate_from_flat(
            body_bias, sigma, sigma_dot, sigma_ddot, ep.nu_dot, ep.nu_ddot
        )
        back = att.sigma_ddot_from_dynamics(
            body_bias, sigma, omega, h_rw, h_rw_dot, ep.nu_dot, ep.nu_ddot
        )
        np.testing.assert_allclose(back, sigma_ddot, rtol=1e-11, atol=1e-14)


def test_sigma_ddot_from_dynamics_broadcasts():
    ts = np.linspace(10.0, 800.0, 6)
    curves = np.array([smooth_curve(t) for t in ts])  # (6, 3 derivs, 3)
    eps = [solve_kepler(ORBIT, t) for t in ts]
    nu_dot = np.array([e.nu_dot for e in eps])
    nu_ddot = np.array([e.nu_ddot for e in eps])
    omega = omega_from_flat(curves[:, 0], curves[:, 1], nu_dot)
    h_rw = hrw_from_flat(BODY, curves[:, 0], curves[:, 1], nu_dot)
    h_rw_dot = hrw_rate_from_flat(
        BODY, curves[:, 0], curves[:, 1], curves[:, 2], nu_dot, nu_ddot
    )
    batched = att.sigma_ddot_from_dynamics(
        BODY, curves[:, 0], omega, h_rw, h_rw_dot, nu_dot, nu_ddot
    )
    np.testing.assert_allclose(batched, curves[:, 2], rtol=1e-11, atol=1e-14)


def test_flat_maps_broadcast_over_grids():
    rng = np.random.default_rng(14)
    sigmas = rng.uniform(-0.6, 0.6, size=(7, 3))
    sigma_dots = rng.normal(scale=0.01, size=(7, 3))
    nu_dots = rng.uniform(5e-4, 2e-3, size=7)
    batched = omega_from_flat(sigmas, sigma_dots, nu_dots)
    assert batched.shape == (7, 3)
    for i in range(7):
        np.testing.assert_allclose(
            batched[i], omega_from_flat(sigmas[i], sigma_dots[i], nu_dots[i]), rtol=1e-14
        )


# ---------------------------------------------------------------------------
# analytic jacobians


def test_structural_jacobians_match_finite_differences():
    rng = np.random.default_rng(15)
    h = 1e-6
    for _ in range(6):
        sigma = rng.uniform(-0.8, 0.8, size=3)
        sigma_dot = rng.normal(scale=0.02, size=3)
        w = rng.normal(size=3)
        dc = att.dkinematics_dmrp(sigma)
        dr = att.drotation_dmrp(sigma)
        dcd = att.dkinematics_rate_dmrp(sigma_dot)
        d2r = att.d2rotation_dmrp2(sigma)
        drw = att.drotT_w_dmrp(sigma, w)
        for k in range(3):
            dk = h * np.eye(3)[k]
            fd_c = (kinematics_matrix(sigma + dk) - kinematics_matrix(sigma - dk)) / (2.0 * h)
            np.testing.assert_allclose(dc[k], fd_c, rtol=1e-6, atol=1e-9)
            fd_r = (rotation_from_mrp(sigma + dk) - rotation_from_mrp(sigma - dk)) / (2.0 * h)
            np.testing.assert_allclose(dr[k], fd_r, rtol=1e-6, atol=1e-8)
            fd_cd = (
                kinematics_matrix_rate(sigma + dk, sigma_dot)
                - kinematics_matrix_rate(sigma - dk, sigma_dot)
            ) / (2.0 * h)
            np.testing.assert_allclose(dcd[k], fd_cd, rtol=1e-6, atol=1e-9)
            fd_d2r = (att.drotation_dmrp(sigma + dk) - att.drotation_dmrp(sigma - dk)) / (2.0 * h)
            np.testing.assert_allclose(d2r[:, k], fd_d2r[:, :, :], rtol=2e-5, atol=1e-6)
            fd_rtw = (
                rotation_from_mrp(sigma + dk).T @ w - rotation_from_mrp(sigma - dk).T @ w
            ) / (2.0 * h)
            np.testing.assert_allclose(drw[:, k], fd_rtw, rtol=1e-6, atol=1e-8)


def test_flat_jacobians_match_fd_method():
    rng = np.random.default_rng(16)
    ep = solve_kepler(ORBIT, 510.0)
    sigma = rng.uniform(-0.7, 0.7, size=(5, 3))
    sigma_dot = rng.normal(scale=0.02, size=(5, 3))
    sigma_ddot = rng.normal(scale=1e-4, size=(5, 3))
    analytic = flat_jacobians(sigma, sigma_dot, sigma_ddot, ep.nu_dot, ep.nu_ddot)
    numeric = flat_jacobians(sigma, sigma_dot, sigma_ddot, ep.nu_dot, ep.nu_ddot, method="fd")
    for name in (
        "domega_dsigma",
        "domega_dsigma_dot",
        "domega_dot_dsigma",
        "domega_dot_dsigma_dot",
        "domega_dot_dsigma_ddot",
    ):
        np.testing.assert_allclose(
            getattr(analytic, name), getattr(numeric, name), rtol=5e-5, atol=1e-7
        )


def test_flat_jacobians_rejects_unknown_method():
    with pytest.raises(ValueError):
        flat_jacobians(np.zeros(3), np.zeros(3), np.zeros(3), 1e-3, 0.0, method="symbolic")


def test_flat_jacobians_predict_first_order_changes():
    """First-order prediction against the exact maps on a small step."""
    rng = np.random.default_rng(17)
    ep = solve_kepler(ORBIT, 222.0)
    sigma = np.array([0.2, -0.4, 0.1])
    sigma_dot = np.array([0.003, 0.001, -0.002])
    sigma_ddot = np.array([1e-5, -2e-5, 3e-5])
    jac = flat_jacobians(sigma, sigma_dot, sigma_ddot, ep.nu_dot, ep.nu_ddot)
    d_sig = 1e-5 * rng.normal(size=3)
    d_sigd = 1e-6 * rng.normal(size=3)
    d_sigdd = 1e-7 * rng.normal(size=3)
    w_pred = omega_from_flat(sigma, sigma_dot, ep.nu_dot) + jac.domega_dsigma @ d_sig + (
        jac.domega_dsigma_dot @ d_sigd
    )
    w_true = omega_from_flat(sigma + d_sig, sigma_dot + d_sigd, ep.nu_dot)
    np.testing.assert_allclose(w_pred, w_true, atol=1e-9)
    wd_pred = (
        omega_dot_from_flat(sigma, sigma_dot, sigma_ddot, ep.nu_dot, ep.nu_ddot)
        + jac.domega_dot_dsigma @ d_sig
        + jac.domega_dot_dsigma_dot @ d_sigd
        + jac.domega_dot_dsigma_ddot @ d_sigdd
    )
    wd_true = omega_dot_from_flat(
        sigma + d_sig, sigma_dot + d_sigd, sigma_ddot + d_sigdd, ep.nu_dot, ep.nu_ddot
    )
    np.testing.assert_allclose(wd_pred, wd_true, atol=1e-9)


# ---------------------------------------------------------------------------
# containers


def test_spacecraft_body_validation():
    with pytest.raises(ValueError):
        SpacecraftBody(inertia=np.array([[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]))
    with pytest.raises(ValueError):
        SpacecraftBody(inertia=np.diag([1.0, -2.0, 3.0]))
    body = SpacecraftBody(inertia=[[40.0, -3.0, -0.5], [-3.0, 28.0, -1.0], [-0.5, -1.0, 45.0]])
    assert body.h_total.shape == (3,)


def test_attitude_state_coerces_arrays():
    state = AttitudeState(sigma=[0.1, 0.2, 0.3], omega=[0.0, 0.0, 0.0], h_rw=[1.0, 2.0, 3.0])
    assert state.sigma.dtype == float
    assert state.h_rw[2] == 3.0
