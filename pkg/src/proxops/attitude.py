"""Attitude parameterization and reaction-wheel flatness maps.

Attitude is parameterized by Modified Rodrigues Parameters (MRPs). Throughout
the package ``sigma`` is the attitude of the body frame with respect to the
LVLH frame, and ``rotation_from_mrp(sigma)`` maps LVLH vector components into
body components. No shadow-set switching is performed; trajectories are kept
within the principal set by construction (boundary rotations of 180 deg give
``norm(sigma) == 1``, which is still regular).

Angular rates, wheel momentum, and wheel torque are all algebraic functions
of (sigma, sigma_dot, sigma_ddot) and the target-orbit rates; the maps and
their analytic Jacobians live here. All functions broadcast over leading
axes: sigma of shape (..., 3) produces matrices of shape (..., 3, 3).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_EYE3 = np.eye(3)


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix, (..., 3) -> (..., 3, 3)."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


_E_SKEW = skew(np.eye(3))  # E[k] = skew of the k-th basis vector


class MrpSingularityError(ValueError):
    """Raised when an MRP operation hits the 360-degree singularity."""


@dataclass(frozen=True)
class SpacecraftBody:
    """Rigid chaser body with reaction wheels.

    Attributes:
        inertia: Body inertia tensor (3x3, kg m^2), symmetric positive definite.
        h_total: Total angular momentum components held constant in the body
            frame (N m s). The flatness maps are exact for h_total = 0.
    """

    inertia: np.ndarray
    h_total: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        inertia = np.asarray(self.inertia, dtype=float).reshape(3, 3)
        h_total = np.asarray(self.h_total, dtype=float).reshape(3)
        object.__setattr__(self, "inertia", inertia)
        object.__setattr__(self, "h_total", h_total)
        if not np.allclose(inertia, inertia.T, rtol=0.0, atol=1e-9):
            raise ValueError("inertia tensor must be symmetric")
        if np.any(np.linalg.eigvalsh(inertia) <= 0.0):
            raise ValueError("inertia tensor must be positive definite")


@dataclass(frozen=True)
class AttitudeState:
    """Body attitude, inertial rate (body components) and wheel momentum."""

    sigma: np.ndarray
    omega: np.ndarray
    h_rw: np.ndarray

    def __post_init__(self) -> None:
        for name in ("sigma", "omega", "h_rw"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(3))


# ---------------------------------------------------------------------------
# rotations and kinematics


def rotation_from_mrp(sigma: np.ndarray) -> np.ndarray:
    """Direction cosine matrix mapping LVLH components to body components."""
    sigma = np.asarray(sigma, dtype=float)
    s = np.sum(sigma * sigma, axis=-1)
    sk = skew(sigma)
    num = 8.0 * (sk @ sk) - 4.0 * (1.0 - s)[..., None, None] * sk
    return _EYE3 + num / ((1.0 + s) ** 2)[..., None, None]


def kinematics_matrix(sigma: np.ndarray) -> np.ndarray:
    """Matrix C(sigma) with sigma_dot = C(sigma) omega_rel."""
    sigma = np.asarray(sigma, dtype=float)
    s = np.sum(sigma * sigma, axis=-1)
    outer = sigma[..., :, None] * sigma[..., None, :]
    return 0.25 * ((1.0 - s)[..., None, None] * _EYE3 + 2.0 * outer + 2.0 * skew(sigma))


def kinematics_matrix_inverse(sigma: np.ndarray) -> np.ndarray:
    """Closed-form inverse of C(sigma): 16 C^T / (1 + |sigma|^2)^2."""
    sigma = np.asarray(sigma, dtype=float)
    s = np.sum(sigma * sigma, axis=-1)
    c = kinematics_matrix(sigma)
    return 16.0 * np.swapaxes(c, -1, -2) / ((1.0 + s) ** 2)[..., None, None]


def kinematics_matrix_rate(sigma: np.ndarray, sigma_dot: np.ndarray) -> np.ndarray:
    """Time derivative of C along (sigma, sigma_dot)."""
    sigma = np.asarray(sigma, dtype=float)
    sigma_dot = np.asarray(sigma_dot, dtype=float)
    dot = np.sum(sigma * sigma_dot, axis=-1)
    outer = sigma_dot[..., :, None] * sigma[..., None, :] + sigma[..., :, None] * sigma_dot[..., None, :]
    return 0.25 * (-2.0 * dot[..., None, None] * _EYE3 + 2.0 * outer + 2.0 * skew(sigma_dot))


def rotation_rate_from_mrp(sigma: np.ndarray, sigma_dot: np.ndarray) -> np.ndarray:
    """Time derivative of the DCM along (sigma, sigma_dot)."""
    dr = drotation_dmrp(sigma)
    return np.einsum("...kij,...k->...ij", dr, np.asarray(sigma_dot, dtype=float))


def mrp_compose(sigma_prev: np.ndarray, sigma_rot: np.ndarray) -> np.ndarray:
    """Compose two MRP rotations: first sigma_prev, then sigma_rot on top.

    The result satisfies R(out) = R(sigma_rot) @ R(sigma_prev).

    Raises:
        MrpSingularityError: When the composed rotation approaches 360 deg
            (the MRP set has a singularity there).
    """
    a = np.asarray(sigma_prev, dtype=float)
    b = np.asarray(sigma_rot, dtype=float)
    sa = np.sum(a * a, axis=-1)
    sb = np.sum(b * b, axis=-1)
    denom = 1.0 + sa * sb - 2.0 * np.sum(a * b, axis=-1)
    if np.any(np.abs(denom) < 1e-8):
        raise MrpSingularityError("MRP composition approaches the 360 deg singularity")
    num = (
        (1.0 - sb)[..., None] * a
        + (1.0 - sa)[..., None] * b
        + 2.0 * np.cross(a, b)
    )
    return num / denom[..., None]


def mrp_from_dcm(dcm: np.ndarray) -> np.ndarray:
    """MRP of a rotation matrix, principal set (norm <= 1).

    Uses the quaternion extraction of the largest Shepperd branch for
    numerical robustness near 180 deg rotations.
    """
    m = np.asarray(dcm, dtype=float).reshape(3, 3)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    cand = np.array([1.0 + tr, 1.0 + 2.0 * m[0, 0] - tr, 1.0 + 2.0 * m[1, 1] - tr, 1.0 + 2.0 * m[2, 2] - tr])
    branch = int(np.argmax(cand))
    if branch == 0:
        q0 = 0.5 * np.sqrt(cand[0])
        q1 = (m[1, 2] - m[2, 1]) / (4.0 * q0)
        q2 = (m[2, 0] - m[0, 2]) / (4.0 * q0)
        q3 = (m[0, 1] - m[1, 0]) / (4.0 * q0)
    elif branch == 1:
        q1 = 0.5 * np.sqrt(cand[1])
        q0 = (m[1, 2] - m[2, 1]) / (4.0 * q1)
        q2 = (m[0, 1] + m[1, 0]) / (4.0 * q1)
        q3 = (m[2, 0] + m[0, 2]) / (4.0 * q1)
    elif branch == 2:
        q2 = 0.5 * np.sqrt(cand[2])
        q0 = (m[2, 0] - m[0, 2]) / (4.0 * q2)
        q1 = (m[0, 1] + m[1, 0]) / (4.0 * q2)
        q3 = (m[1, 2] + m[2, 1]) / (4.0 * q2)
    else:
        q3 = 0.5 * np.sqrt(cand[3])
        q0 = (m[0, 1] - m[1, 0]) / (4.0 * q3)
        q1 = (m[2, 0] + m[0, 2]) / (4.0 * q3)
        q2 = (m[1, 2] + m[2, 1]) / (4.0 * q3)
    quat = np.array([q0, q1, q2, q3])
    if quat[0] < 0.0:
        quat = -quat
    return quat[1:] / (1.0 + quat[0])


def euler313_to_dcm(angles: np.ndarray) -> np.ndarray:
    """DCM of a passive intrinsic 3-1-3 Euler sequence (rad)."""
    t1, t2, t3 = np.asarray(angles, dtype=float).reshape(3)

    def rot3(a: float) -> np.ndarray:
        c, s = np.cos(a), np.sin(a)
        return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])

    def rot1(a: float) -> np.ndarray:
        c, s = np.cos(a), np.sin(a)
        return np.array([[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]])

    return rot3(t3) @ rot1(t2) @ rot3(t1)


def dcm_to_euler313(dcm: np.ndarray) -> np.ndarray:
    """Extract 3-1-3 Euler angles (rad) from a DCM.

    The middle angle is returned in [0, pi]. At the coning singularity
    (middle angle 0 or pi) the split between first and third angle is not
    unique; the returned pair still reproduces the matrix.
    """
    m = np.asarray(dcm, dtype=float).reshape(3, 3)
    t2 = float(np.arccos(np.clip(m[2, 2], -1.0, 1.0)))
    if min(abs(t2), np.pi - t2) < 1e-12:
        # degenerate: only the combination of first and third angle is
        # observable; fold it all into the first angle
        t1 = float(np.arctan2(m[0, 1], m[0, 0]))
        return np.array([t1, t2, 0.0])
    t1 = float(np.arctan2(m[2, 0], -m[2, 1]))
    t3 = float(np.arctan2(m[0, 2], m[1, 2]))
    return np.array([t1, t2, t3])


def lvlh_angular_velocity(nu_dot) -> np.ndarray:
    """LVLH frame rate relative to inertial, in LVLH components.

    The orbit rotates about the negative y axis (y is anti-momentum), so the
    components are [0, -nu_dot, 0]. Accepts scalars or arrays of rates.
    """
    nu_dot = np.asarray(nu_dot, dtype=float)
    out = np.zeros(nu_dot.shape + (3,))
    out[..., 1] = -nu_dot
    return out


def lvlh_angular_acceleration(nu_ddot) -> np.ndarray:
    """Time derivative of the LVLH frame rate, [0, -nu_ddot, 0]."""
    return lvlh_angular_velocity(nu_ddot)


# ---------------------------------------------------------------------------
# flatness maps: attitude curve -> rates, wheel momentum, wheel torque


def sigma_dot_from_omega(sigma: np.ndarray, omega: np.ndarray, nu_dot) -> np.ndarray:
    """MRP rate from the body-inertial rate: C(sigma) (omega - R(sigma) w_L)."""
    sigma = np.asarray(sigma, dtype=float)
    omega = np.asarray(omega, dtype=float)
    w_l = lvlh_angular_velocity(nu_dot)
    rel = omega - np.einsum("...ij,...j->...i", rotation_from_mrp(sigma), w_l)
    return np.einsum("...ij,...j->...i", kinematics_matrix(sigma), rel)


def omega_from_flat(sigma: np.ndarray, sigma_dot: np.ndarray, nu_dot) -> np.ndarray:
    """Body-inertial angular rate along an attitude curve.

    omega = C^-1(sigma) sigma_dot + R(sigma) w_L, all in body components.
    """
    sigma = np.asarray(sigma, dtype=float)
    sigma_dot = np.asarray(sigma_dot, dtype=float)
    minv = kinematics_matrix_inverse(sigma)
    w_l = lvlh_angular_velocity(nu_dot)
    return np.einsum("...ij,...j->...i", minv, sigma_dot) + np.einsum(
        "...ij,...j->...i", rotation_from_mrp(sigma), w_l
    )


def omega_dot_from_flat(
    sigma: np.ndarray, sigma_dot: np.ndarray, sigma_ddot: np.ndarray, nu_dot, nu_ddot
) -> np.ndarray:
    """Body-inertial angular acceleration along an attitude curve.

    Differentiating omega = C^-1 sigma_dot + R w_L in time gives

        omega_dot = C^-1 sigma_ddot - C^-1 Cdot C^-1 sigma_dot
                    + Rdot w_L + R w_L_dot.
    """
    sigma = np.asarray(sigma, dtype=float)
    sigma_dot = np.asarray(sigma_dot, dtype=float)
    sigma_ddot = np.asarray(sigma_ddot, dtype=float)
    minv = kinematics_matrix_inverse(sigma)
    cdot = kinematics_matrix_rate(sigma, sigma_dot)
    w_l = lvlh_angular_velocity(nu_dot)
    w_l_dot = lvlh_angular_acceleration(nu_ddot)
    rel_rate = np.einsum("...ij,...j->...i", minv, sigma_dot)
    core = sigma_ddot - np.einsum("...ij,...j->...i", cdot, rel_rate)
    out = np.einsum("...ij,...j->...i", minv, core)
    out += np.einsum("...ij,...j->...i", rotation_rate_from_mrp(sigma, sigma_dot), w_l)
    out += np.einsum("...ij,...j->...i", rotation_from_mrp(sigma), w_l_dot)
    return out


def omega_rel_lvlh(sigma: np.ndarray, omega: np.ndarray, nu_dot) -> np.ndarray:
    """Body rate relative to the LVLH frame, body components: omega - R w_L."""
    sigma = np.asarray(sigma, dtype=float)
    omega = np.asarray(omega, dtype=float)
    w_l = lvlh_angular_velocity(nu_dot)
    return omega - np.einsum("...ij,...j->...i", rotation_from_mrp(sigma), w_l)


def hrw_from_flat(body: SpacecraftBody, sigma, sigma_dot, nu_dot) -> np.ndarray:
    """Wheel momentum along an attitude curve: h_rw = h_total - I omega."""
    omega = omega_from_flat(sigma, sigma_dot, nu_dot)
    return body.h_total - np.einsum("ij,...j->...i", body.inertia, omega)


def hrw_rate_from_flat(
    body: SpacecraftBody, sigma, sigma_dot, sigma_ddot, nu_dot, nu_ddot
) -> np.ndarray:
    """Wheel torque along an attitude curve.

    From the Euler equation with zero external torque,
    h_rw_dot = -I omega_dot - omega x h_total.
    """
    omega = omega_from_flat(sigma, sigma_dot, nu_dot)
    omega_dot = omega_dot_from_flat(sigma, sigma_dot, sigma_ddot, nu_dot, nu_ddot)
    return -np.einsum("ij,...j->...i", body.inertia, omega_dot) - np.cross(omega, body.h_total)


def sigma_ddot_from_dynamics(
    body: SpacecraftBody,
    sigma: np.ndarray,
    omega: np.ndarray,
    h_rw: np.ndarray,
    hdot_rw: np.ndarray,
    nu_dot,
    nu_ddot,
) -> np.ndarray:
    """MRP acceleration implied by the rigid-body state and the wheel torque.

    Inverts the flatness maps: the Euler equation gives omega_dot from the
    applied wheel torque, and differentiating sigma_dot = C (omega - R w_L)
    in time yields sigma_ddot. Exact inverse of omega_dot_from_flat /
    hrw_rate_from_flat when the inputs are flatness-consistent.
    """
    sigma = np.asarray(sigma, dtype=float)
    omega = np.asarray(omega, dtype=float)
    h_rw = np.asarray(h_rw, dtype=float)
    hdot_rw = np.asarray(hdot_rw, dtype=float)
    rot = rotation_from_mrp(sigma)
    w_l = lvlh_angular_velocity(nu_dot)
    w_l_dot = lvlh_angular_acceleration(nu_ddot)
    rel = omega - np.einsum("...ij,...j->...i", rot, w_l)
    sigma_dot = np.einsum("...ij,...j->...i", kinematics_matrix(sigma), rel)
    h_tot = np.einsum("ij,...j->...i", body.inertia, omega) + h_rw
    torque = -hdot_rw - np.cross(omega, h_tot)
    omega_dot = np.linalg.solve(
        np.broadcast_to(body.inertia, torque.shape + (3,)), torque[..., None]
    )[..., 0]
    rel_dot = (
        omega_dot
        - np.einsum("...ij,...j->...i", rotation_rate_from_mrp(sigma, sigma_dot), w_l)
        - np.einsum("...ij,...j->...i", rot, w_l_dot)
    )
    return np.einsum(
        "...ij,...j->...i", kinematics_matrix_rate(sigma, sigma_dot), rel
    ) + np.einsum("...ij,...j->...i", kinematics_matrix(sigma), rel_dot)


# ---------------------------------------------------------------------------
# derivatives with respect to the MRP arguments (for the convex subproblems)


def dkinematics_dmrp(sigma: np.ndarray) -> np.ndarray:
    """dC/dsigma, shape (..., 3, 3, 3) indexed [..., k, i, j]."""
    sigma = np.asarray(sigma, dtype=float)
    term_a = -0.5 * sigma[..., :, None, None] * _EYE3
    term_b = 0.5 * _EYE3[:, :, None] * sigma[..., None, None, :]
    term_c = 0.5 * sigma[..., None, :, None] * _EYE3[:, None, :]
    return term_a + term_b + term_c + 0.5 * _E_SKEW


def dkinematics_rate_dmrp(sigma_dot: np.ndarray) -> np.ndarray:
    """dCdot/dsigma at fixed sigma_dot; the skew term of Cdot drops out."""
    return dkinematics_dmrp(sigma_dot) - 0.5 * _E_SKEW


def drotation_dmrp(sigma: np.ndarray) -> np.ndarray:
    """dR/dsigma, shape (..., 3, 3, 3) indexed [..., k, i, j]."""
    sigma = np.asarray(sigma, dtype=float)
    s = np.sum(sigma * sigma, axis=-1)
    sk = skew(sigma)
    num = 8.0 * (sk @ sk) - 4.0 * (1.0 - s)[..., None, None] * sk
    den = (1.0 + s) ** 2
    es = np.einsum("kab,...bc->...kac", _E_SKEW, sk)
    se = np.einsum("...ab,kbc->...kac", sk, _E_SKEW)
    dnum = (
        8.0 * (es + se)
        + 8.0 * sigma[..., :, None, None] * sk[..., None, :, :]
        - 4.0 * (1.0 - s)[..., None, None, None] * _E_SKEW
    )
    dden = 4.0 * sigma * (1.0 + s)[..., None]
    return (
        dnum / den[..., None, None, None]
        - num[..., None, :, :] * dden[..., :, None, None] / (den**2)[..., None, None, None]
    )


def d2rotation_dmrp2(sigma: np.ndarray) -> np.ndarray:
    """d2R/dsigma2, shape (..., 3, 3, 3, 3) indexed [..., k, m, i, j]."""
    sigma = np.asarray(sigma, dtype=float)
    s = np.sum(sigma * sigma, axis=-1)
    sk = skew(sigma)
    num = 8.0 * (sk @ sk) - 4.0 * (1.0 - s)[..., None, None] * sk
    den = (1.0 + s) ** 2

    es = np.einsum("kab,...bc->...kac", _E_SKEW, sk)
    se = np.einsum("...ab,kbc->...kac", sk, _E_SKEW)
    dnum = (
        8.0 * (es + se)
        + 8.0 * sigma[..., :, None, None] * sk[..., None, :, :]
        - 4.0 * (1.0 - s)[..., None, None, None] * _E_SKEW
    )
    dden = 4.0 * sigma * (1.0 + s)[..., None]

    ee = np.einsum("kab,mbc->kmac", _E_SKEW, _E_SKEW)
    d2num = 8.0 * (ee + np.swapaxes(ee, 0, 1))
    d2num = d2num + 8.0 * np.einsum("km,...ij->...kmij", _EYE3, sk)
    d2num = d2num + 8.0 * np.einsum("...k,mij->...kmij", sigma, _E_SKEW)
    d2num = d2num + 8.0 * np.einsum("...m,kij->...kmij", sigma, _E_SKEW)
    d2den = 4.0 * _EYE3 * (1.0 + s)[..., None, None] + 8.0 * (
        sigma[..., :, None] * sigma[..., None, :]
    )

    den1 = den[..., None, None, None, None]
    out = d2num / den1
    out = out - np.einsum("...kij,...m->...kmij", dnum, dden) / den1**2
    out = out - np.einsum("...mij,...k->...kmij", dnum, dden) / den1**2
    out = out - np.einsum("...ij,...km->...kmij", num, d2den) / den1**2
    out = out + 2.0 * np.einsum("...ij,...k,...m->...kmij", num, dden, dden) / den1**3
    return out


def drotation_rate_dmrp(sigma: np.ndarray, sigma_dot: np.ndarray) -> np.ndarray:
    """dRdot/dsigma at fixed sigma_dot, shape (..., 3, 3, 3)."""
    d2r = d2rotation_dmrp2(sigma)
    return np.einsum("...kmij,...m->...kij", d2r, np.asarray(sigma_dot, dtype=float))


def drotT_w_dmrp(sigma: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Jacobian of R(sigma)^T w with respect to sigma, shape (..., 3, 3).

    Column k is (dR/dsigma_k)^T w; used to linearize body-fixed thrust
    directions mapped into the LVLH frame.
    """
    dr = drotation_dmrp(sigma)
    return np.einsum("...kij,...i->...jk", dr, np.asarray(w, dtype=float))


@dataclass(frozen=True)
class FlatJacobians:
    """Partial derivatives of the rate maps with respect to (sigma, sigma_dot, sigma_ddot).

    All arrays are (..., 3, 3) indexed [..., output, argument].
    """

    domega_dsigma: np.ndarray
    domega_dsigma_dot: np.ndarray
    domega_dot_dsigma: np.ndarray
    domega_dot_dsigma_dot: np.ndarray
    domega_dot_dsigma_ddot: np.ndarray


def flat_jacobians(
    sigma, sigma_dot, sigma_ddot, nu_dot, nu_ddot, method: str = "analytic"
) -> FlatJacobians:
    """Jacobians of omega and omega_dot along an attitude curve.

    Args:
        sigma, sigma_dot, sigma_ddot: Attitude curve values, (..., 3).
        nu_dot, nu_ddot: Target orbit rates, scalars or (...) arrays.
        method: "analytic" (default) or "fd" for a central-difference check
            path.

    Returns:
        FlatJacobians with (..., 3, 3) blocks.
    """
    sigma = np.asarray(sigma, dtype=float)
    sigma_dot = np.asarray(sigma_dot, dtype=float)
    sigma_ddot = np.asarray(sigma_ddot, dtype=float)
    if method == "fd":
        return _flat_jacobians_fd(sigma, sigma_dot, sigma_ddot, nu_dot, nu_ddot)
    if method != "analytic":
        raise ValueError(f"unknown jacobian method {method!r}")

    minv = kinematics_matrix_inverse(sigma)
    cdot = kinematics_matrix_rate(sigma, sigma_dot)
    dc = dkinematics_dmrp(sigma)
    dcdot = dkinematics_rate_dmrp(sigma_dot)
    dr = drotation_dmrp(sigma)
    drdot = drotation_rate_dmrp(sigma, sigma_dot)
    w_l = lvlh_angular_velocity(nu_dot)
    w_l_dot = lvlh_angular_acceleration(nu_ddot)

    # dM_k = -M dC_k M
    dminv = -np.einsum("...ia,...kab,...bj->...kij", minv, dc, minv)
    m_sdot = np.einsum("...ij,...j->...i", minv, sigma_dot)

    domega_dsigma = np.einsum("...kij,...j->...ik", dminv, sigma_dot) + np.einsum(
        "...kij,...j->...ik", dr, w_l
    )
    domega_dsigma_dot = minv

    core = sigma_ddot - np.einsum("...ij,...j->...i", cdot, m_sdot)
    mcdot = minv @ cdot
    domega_dot_dsigma = (
        np.einsum("...kij,...j->...ik", dminv, core)
        - np.einsum("...ia,...kab,...b->...ik", minv, dcdot, m_sdot)
        - np.einsum("...ia,...ab,...kbj,...j->...ik", minv, cdot, dminv, sigma_dot)
        + np.einsum("...kij,...j->...ik", drdot, w_l)
        + np.einsum("...kij,...j->...ik", dr, w_l_dot)
    )
    domega_dot_dsigma_dot = (
        -np.einsum("...ia,...kab,...b->...ik", minv, dc, m_sdot)
        - mcdot @ minv
        + np.einsum("...kij,...j->...ik", dr, w_l)
    )
    return FlatJacobians(
        domega_dsigma=domega_dsigma,
        domega_dsigma_dot=domega_dsigma_dot,
        domega_dot_dsigma=domega_dot_dsigma,
        domega_dot_dsigma_dot=domega_dot_dsigma_dot,
        domega_dot_dsigma_ddot=minv,
    )


def _flat_jacobians_fd(sigma, sigma_dot, sigma_ddot, nu_dot, nu_ddot) -> FlatJacobians:
    h = 1e-6
    shape = sigma.shape + (3,)
    blocks = [np.zeros(shape) for _ in range(5)]
    for k in range(3):
        dk = h * _EYE3[k]
        blocks[0][..., :, k] = (
            omega_from_flat(sigma + dk, sigma_dot, nu_dot)
            - omega_from_flat(sigma - dk, sigma_dot, nu_dot)
        ) / (2.0 * h)
        blocks[1][..., :, k] = (
            omega_from_flat(sigma, sigma_dot + dk, nu_dot)
            - omega_from_flat(sigma, sigma_dot - dk, nu_dot)
        ) / (2.0 * h)
        blocks[2][..., :, k] = (
            omega_dot_from_flat(sigma + dk, sigma_dot, sigma_ddot, nu_dot, nu_ddot)
            - omega_dot_from_flat(sigma - dk, sigma_dot, sigma_ddot, nu_dot, nu_ddot)
        ) / (2.0 * h)
        blocks[3][..., :, k] = (
            omega_dot_from_flat(sigma, sigma_dot + dk, sigma_ddot, nu_dot, nu_ddot)
            - omega_dot_from_flat(sigma, sigma_dot - dk, sigma_ddot, nu_dot, nu_ddot)
        ) / (2.0 * h)
        blocks[4][..., :, k] = (
            omega_dot_from_flat(sigma, sigma_dot, sigma_ddot + dk, nu_dot, nu_ddot)
            - omega_dot_from_flat(sigma, sigma_dot, sigma_ddot - dk, nu_dot, nu_ddot)
        ) / (2.0 * h)
    return FlatJacobians(*blocks)
