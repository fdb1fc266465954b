"""Target-orbit kinematics and relative translational dynamics.

All quantities are SI (m, s, rad) unless noted. The relative frame is the
target-centered LVLH triad used throughout the package:

* ``z`` points radially from the target toward the Earth center,
* ``y`` is opposite the orbital angular momentum (cross-track),
* ``x`` completes the right-handed triad (close to along-track; not exactly
  the velocity direction on an eccentric orbit).

The state vector convention is ``x = [x, y, z, xdot, ydot, zdot]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MU_EARTH = 398600.4e9
"""Earth gravitational parameter (m^3/s^2)."""

R_EARTH = 6378.137e3
"""Earth equatorial radius (m), used to convert periapsis altitude to semi-major axis."""

KEPLER_TOL = 1e-12
KEPLER_MAX_ITER = 50


class KeplerConvergenceError(RuntimeError):
    """Kepler iteration failed to converge; carries the last residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class TargetOrbit:
    """Closed Keplerian orbit of the passive target vehicle.

    Attributes:
        semi_major_axis: Semi-major axis a (m), > 0.
        eccentricity: Eccentricity e, in [0, 1).
        periapsis_time: Epoch of periapsis passage t_p (s).
        mu: Gravitational parameter (m^3/s^2).
    """

    semi_major_axis: float
    eccentricity: float
    periapsis_time: float = 0.0
    mu: float = MU_EARTH

    def __post_init__(self) -> None:
        if not 0.0 <= self.eccentricity < 1.0:
            raise ValueError(f"eccentricity must be in [0, 1), got {self.eccentricity}")
        if self.semi_major_axis <= 0.0:
            raise ValueError(f"semi-major axis must be positive, got {self.semi_major_axis}")
        if self.mu <= 0.0:
            raise ValueError(f"mu must be positive, got {self.mu}")

    @property
    def mean_motion(self) -> float:
        """Mean motion n (rad/s)."""
        return math.sqrt(self.mu / self.semi_major_axis**3)

    @property
    def period(self) -> float:
        """Orbital period (s)."""
        return 2.0 * math.pi / self.mean_motion

    @classmethod
    def from_periapsis_altitude(
        cls,
        altitude: float,
        eccentricity: float,
        true_anomaly_at_t0: float,
        t0: float = 0.0,
        mu: float = MU_EARTH,
    ) -> "TargetOrbit":
        """Build an orbit from periapsis altitude and the true anomaly at t0.

        Args:
            altitude: Periapsis altitude above the Earth surface h_p (m).
            eccentricity: Eccentricity e in [0, 1).
            true_anomaly_at_t0: True anomaly nu at time t0 (rad).
            t0: Reference time (s).
            mu: Gravitational parameter (m^3/s^2).

        Returns:
            TargetOrbit with periapsis_time placed at or before t0.
        """
        a = (R_EARTH + altitude) / (1.0 - eccentricity)
        e = eccentricity
        nu = true_anomaly_at_t0
        ecc_anom = 2.0 * math.atan2(
            math.sqrt(1.0 - e) * math.sin(nu / 2.0), math.sqrt(1.0 + e) * math.cos(nu / 2.0)
        )
        mean_anom = ecc_anom - e * math.sin(ecc_anom)
        n = math.sqrt(mu / a**3)
        t_p = t0 - mean_anom / n
        if t_p > t0:
            t_p -= 2.0 * math.pi / n
        return cls(semi_major_axis=a, eccentricity=e, periapsis_time=t_p, mu=mu)


@dataclass(frozen=True)
class OrbitEpoch:
    """Target orbit kinematic quantities at one time.

    Attributes:
        t: Time (s).
        ecc_anomaly: Eccentric anomaly E (rad), unwrapped (continuous in t).
        true_anomaly: True anomaly nu (rad), unwrapped.
        radius: Target orbital radius r_t (m).
        nu_dot: True anomaly rate (rad/s).
        nu_ddot: True anomaly acceleration (rad/s^2).
    """

    t: float
    ecc_anomaly: float
    true_anomaly: float
    radius: float
    nu_dot: float
    nu_ddot: float


@dataclass(frozen=True)
class RelativeState:
    """Chaser state relative to the target in the LVLH frame.

    Attributes:
        r: Position [x, y, z] (m).
        v: Velocity [xdot, ydot, zdot] (m/s).
    """

    r: np.ndarray
    v: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "r", np.asarray(self.r, dtype=float).reshape(3))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float).reshape(3))
        if not (np.isfinite(self.r).all() and np.isfinite(self.v).all()):
            raise ValueError("relative state components must be finite")

    def as_vector(self) -> np.ndarray:
        """Return the 6-vector [r; v]."""
        return np.concatenate([self.r, self.v])

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "RelativeState":
        x = np.asarray(x, dtype=float).reshape(6)
        return cls(r=x[:3], v=x[3:])


def _solve_ecc_anomaly(e: float, mean_anomaly: float) -> float:
    """Solve E - e sin E = M for one 2-pi-reduced mean anomaly M in [0, 2pi)."""
    m = mean_anomaly
    ecc_anom = m
    for _ in range(KEPLER_MAX_ITER):
        f = ecc_anom - e * math.sin(ecc_anom) - m
        if abs(f) < KEPLER_TOL:
            return ecc_anom
        ecc_anom -= f / (1.0 - e * math.cos(ecc_anom))
        if ecc_anom < -1.0 or ecc_anom > 2.0 * math.pi + 1.0:
            break  # diverging for high eccentricity; use bisection instead
    # Bisection fallback (f is monotone in E for e < 1), relevant for e > 0.8.
    lo, hi = 0.0, 2.0 * math.pi
    f_last = math.inf
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_last = mid - e * math.sin(mid) - m
        if abs(f_last) < KEPLER_TOL:
            return mid
        if f_last > 0.0:
            hi = mid
        else:
            lo = mid
    if abs(f_last) < 1e-9:
        return 0.5 * (lo + hi)
    raise KeplerConvergenceError(
        f"Kepler iteration failed for e={e}, M={mean_anomaly}", residual=abs(f_last)
    )


def solve_kepler(orbit: TargetOrbit, t: float) -> OrbitEpoch:
    """Solve the Kepler time equation at time t.

    The returned anomalies are unwrapped: E and nu grow monotonically with t,
    so orbit counts are preserved across periapsis passages.

    Args:
        orbit: Target orbit.
        t: Time (s), finite.

    Returns:
        OrbitEpoch with E, nu, r_t, nu_dot, nu_ddot consistent to the Kepler
        tolerance.

    Raises:
        KeplerConvergenceError: If the iteration does not converge.
    """
    if not math.isfinite(t):
        raise ValueError(f"time must be finite, got {t}")
    e = orbit.eccentricity
    n = orbit.mean_motion
    mean_anom = n * (t - orbit.periapsis_time)
    k_wraps = math.floor(mean_anom / (2.0 * math.pi))
    m_reduced = mean_anom - 2.0 * math.pi * k_wraps
    ecc_red = _solve_ecc_anomaly(e, m_reduced)
    ecc_anom = ecc_red + 2.0 * math.pi * k_wraps

    # nu - E lies in (-pi, pi); adding it to unwrapped E keeps nu unwrapped.
    beta = e / (1.0 + math.sqrt(1.0 - e * e))
    sin_e, cos_e = math.sin(ecc_anom), math.cos(ecc_anom)
    true_anom = ecc_anom + 2.0 * math.atan2(beta * sin_e, 1.0 - beta * cos_e)

    a = orbit.semi_major_axis
    radius = a * (1.0 - e * cos_e)
    nu_dot = n * math.sqrt(1.0 - e * e) * (a / radius) ** 2
    ecc_rate = n / (1.0 - e * cos_e)
    radius_rate = a * e * sin_e * ecc_rate
    nu_ddot = -2.0 * nu_dot * radius_rate / radius
    return OrbitEpoch(
        t=t,
        ecc_anomaly=ecc_anom,
        true_anomaly=true_anom,
        radius=radius,
        nu_dot=nu_dot,
        nu_ddot=nu_ddot,
    )


def epoch_table(orbit: TargetOrbit, times: np.ndarray) -> dict[str, np.ndarray]:
    """Vectorized orbit kinematics over an array of times.

    Returns a dict of arrays keyed ``nu``, ``nu_dot``, ``nu_ddot``, ``radius``
    aligned with ``times``. Used by the simulation loops, which evaluate the
    same quantities at thousands of step and half-step times.
    """
    times = np.asarray(times, dtype=float)
    e = orbit.eccentricity
    n = orbit.mean_motion
    a = orbit.semi_major_axis
    mean_anom = n * (times - orbit.periapsis_time)
    wraps = np.floor(mean_anom / (2.0 * np.pi))
    m_red = mean_anom - 2.0 * np.pi * wraps
    ecc = m_red.copy()
    for _ in range(KEPLER_MAX_ITER):
        f = ecc - e * np.sin(ecc) - m_red
        if np.max(np.abs(f)) < KEPLER_TOL:
            break
        ecc = ecc - f / (1.0 - e * np.cos(ecc))
    else:
        # element-wise fallback for any stragglers
        f = ecc - e * np.sin(ecc) - m_red
        bad = np.abs(f) >= KEPLER_TOL
        for idx in np.flatnonzero(bad):
            ecc[idx] = _solve_ecc_anomaly(e, float(m_red[idx]))
    ecc_anom = ecc + 2.0 * np.pi * wraps
    beta = e / (1.0 + math.sqrt(1.0 - e * e))
    sin_e, cos_e = np.sin(ecc_anom), np.cos(ecc_anom)
    nu = ecc_anom + 2.0 * np.arctan2(beta * sin_e, 1.0 - beta * cos_e)
    radius = a * (1.0 - e * cos_e)
    nu_dot = n * math.sqrt(1.0 - e * e) * (a / radius) ** 2
    ecc_rate = n / (1.0 - e * cos_e)
    radius_rate = a * e * sin_e * ecc_rate
    nu_ddot = -2.0 * nu_dot * radius_rate / radius
    return {"nu": nu, "nu_dot": nu_dot, "nu_ddot": nu_ddot, "radius": radius}


def _ya_fundamental(orbit: TargetOrbit, t: float) -> np.ndarray:
    """Fundamental matrix of the linearized relative motion at time t.

    Built from the Tschauner-Hempel solutions in rho-scaled coordinates with
    true-anomaly derivatives, mapped to physical units and rotated into the
    package's LVLH axes. Columns span all solutions of the zero-thrust
    equations; the transition matrix follows as Y(t) Y(t0)^-1.
    """
    ep = solve_kepler(orbit, t)
    e = orbit.eccentricity
    n = orbit.mean_motion
    nu = ep.true_anomaly
    rho = 1.0 + e * math.cos(nu)
    s = rho * math.sin(nu)
    c = rho * math.cos(nu)
    sp = math.cos(nu) + e * math.cos(2.0 * nu)
    cp = -(math.sin(nu) + e * math.sin(2.0 * nu))
    one_m_e2 = 1.0 - e * e
    j_sec = n * (t - orbit.periapsis_time) / one_m_e2**1.5

    # In-plane solutions, state ordering [x~, y~, x~', y~'] with x~ radial and
    # y~ along-track in the classic frame, primes d/dnu, positions rho-scaled.
    phi_ip = np.array(
        [
            [s, c, 2.0 - 3.0 * e * s * j_sec, 0.0],
            [c * (1.0 + 1.0 / rho), -s * (1.0 + 1.0 / rho), -3.0 * rho**2 * j_sec, 1.0],
            [sp, cp, -3.0 * e * (sp * j_sec + math.sin(nu) / rho), 0.0],
            [-2.0 * s, e - 2.0 * c, 6.0 * e * s * j_sec - 3.0, 0.0],
        ]
    )
    # Out-of-plane: z~'' = -z~.
    phi_op = np.array([[math.sin(nu), math.cos(nu)], [math.cos(nu), -math.sin(nu)]])

    # Assemble 6x6 in scaled coordinates, rows [x~, y~, z~, x~', y~', z~'].
    fund = np.zeros((6, 6))
    fund[np.ix_([0, 1, 3, 4], [0, 1, 2, 3])] = phi_ip
    fund[np.ix_([2, 5], [4, 5])] = phi_op

    # Scaled/anomaly domain -> physical positions and time velocities.
    kappa = n / one_m_e2**1.5
    to_phys = np.zeros((6, 6))
    to_phys[:3, :3] = np.eye(3) / rho
    to_phys[3:, :3] = kappa * e * math.sin(nu) * np.eye(3)
    to_phys[3:, 3:] = kappa * rho * np.eye(3)

    # Classic axes (radial out, along-track, momentum) -> package axes.
    perm = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, -1.0], [-1.0, 0.0, 0.0]])
    axes = np.zeros((6, 6))
    axes[:3, :3] = perm
    axes[3:, 3:] = perm
    return axes @ to_phys @ fund


def stm(orbit: TargetOrbit, t: float, t0: float) -> np.ndarray:
    """State transition matrix of the zero-thrust linear relative motion.

    Args:
        orbit: Target orbit.
        t: Arrival time (s).
        t0: Departure time (s).

    Returns:
        6x6 matrix mapping the relative state at t0 to the state at t.
    """
    y_t = _ya_fundamental(orbit, t)
    y_t0 = _ya_fundamental(orbit, t0)
    return y_t @ np.linalg.inv(y_t0)


def stm_factors(orbit: TargetOrbit, times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Fundamental matrices and inverses at many times, for batched transitions.

    Returns (Y, Y_inv) with shapes (len(times), 6, 6); any transition is then
    Y[j] @ Y_inv[i] for t_j >= t_i. Factoring this way avoids re-solving
    Kepler for every (row, column) pair of the stack matrices.
    """
    times = np.asarray(times, dtype=float)
    y = np.stack([_ya_fundamental(orbit, float(t)) for t in times])
    y_inv = np.linalg.inv(y)
    return y, y_inv


B_INPUT = np.vstack([np.zeros((3, 3)), np.eye(3)])
"""Input matrix B = [0; Id] mapping an LVLH velocity increment into the state."""


def linear_rhs(epoch: OrbitEpoch, state: np.ndarray, mu: float = MU_EARTH) -> np.ndarray:
    """Zero-thrust linearized relative dynamics (time domain).

    Args:
        epoch: Target orbit kinematics at the evaluation time.
        state: Relative state 6-vector.
        mu: Gravitational parameter (m^3/s^2).

    Returns:
        d(state)/dt as a 6-vector.
    """
    x, y, z, xd, yd, zd = state
    mu_r3 = mu / epoch.radius**3
    nu_d, nu_dd = epoch.nu_dot, epoch.nu_ddot
    ax = nu_dd * z + 2.0 * nu_d * zd + nu_d**2 * x - mu_r3 * x
    ay = -mu_r3 * y
    az = -nu_dd * x - 2.0 * nu_d * xd + nu_d**2 * z + 2.0 * mu_r3 * z
    return np.array([xd, yd, zd, ax, ay, az])


def nonlinear_rhs(epoch: OrbitEpoch, state: np.ndarray, mu: float = MU_EARTH) -> np.ndarray:
    """Nonlinear relative motion dynamics used as the truth plant.

    Args:
        epoch: Target orbit kinematics at the evaluation time.
        state: Relative state 6-vector.
        mu: Gravitational parameter (m^3/s^2).

    Returns:
        d(state)/dt as a 6-vector.

    Raises:
        ValueError: If the chaser coincides with the Earth center (singular
            gravity denominator).
    """
    x, y, z, xd, yd, zd = state
    r_t = epoch.radius
    dist_sq = x * x + y * y + (r_t - z) * (r_t - z)
    if dist_sq <= 0.0:
        raise ValueError("chaser position coincides with the Earth center")
    d3 = dist_sq**1.5
    nu_d, nu_dd = epoch.nu_dot, epoch.nu_ddot
    ax = nu_dd * z + 2.0 * nu_d * zd + nu_d**2 * x - mu * x / d3
    ay = -mu * y / d3
    az = -nu_dd * x - 2.0 * nu_d * xd + nu_d**2 * z - mu * (z - r_t) / d3 - mu / r_t**2
    return np.array([xd, yd, zd, ax, ay, az])


def propagate_impulsive(
    orbit: TargetOrbit,
    x0: RelativeState,
    t0: float,
    impulses: list[tuple[float, np.ndarray]],
    t: float,
) -> RelativeState:
    """Propagate the linear model with instantaneous velocity increments.

    Impulses at time t_k apply for t >= t_k (closed inclusion), so an impulse
    at exactly t contributes to the returned velocity.

    Args:
        orbit: Target orbit.
        x0: State at t0.
        t0: Departure time (s).
        impulses: Sorted list of (time, LVLH delta-v 3-vector) pairs within
            [t0, t].
        t: Arrival time (s).

    Returns:
        RelativeState at t.

    Raises:
        ValueError: If impulse times are unsorted or outside [t0, t].
    """
    times = [ti for ti, _ in impulses]
    if any(t2 < t1 for t1, t2 in zip(times, times[1:])):
        raise ValueError("impulse times must be sorted nondecreasing")
    if times and (times[0] < t0 or times[-1] > t):
        raise ValueError(f"impulse times must lie within [{t0}, {t}]")
    vec = stm(orbit, t, t0) @ x0.as_vector()
    for t_i, dv in impulses:
        vec = vec + stm(orbit, t, t_i) @ (B_INPUT @ np.asarray(dv, dtype=float))
    return RelativeState.from_vector(vec)


def integrate_plant(
    orbit: TargetOrbit,
    x0: RelativeState,
    t0: float,
    t1: float,
    impulses: list[tuple[float, np.ndarray]] | None = None,
    step: float = 0.1,
) -> RelativeState:
    """Integrate the nonlinear plant with fixed-step RK4 and impulse jumps.

    Step boundaries land exactly on impulse times by splitting the final step
    before each event. Impulses at t0 apply before integration starts; at t1,
    after it ends.

    Args:
        orbit: Target orbit.
        x0: State at t0.
        t0: Start time (s).
        t1: End time (s), >= t0.
        impulses: Sorted (time, LVLH delta-v) pairs within [t0, t1].
        step: RK4 step size (s).

    Returns:
        RelativeState at t1.
    """
    if t1 < t0:
        raise ValueError(f"t1 must be >= t0, got [{t0}, {t1}]")
    impulses = list(impulses or [])
    times = [ti for ti, _ in impulses]
    if any(t2 < t1_ for t1_, t2 in zip(times, times[1:])):
        raise ValueError("impulse times must be sorted nondecreasing")
    if times and (times[0] < t0 or times[-1] > t1):
        raise ValueError(f"impulse times must lie within [{t0}, {t1}]")

    state = x0.as_vector().copy()
    events = impulses + [(t1, np.zeros(3))]
    t = t0
    for t_event, dv in events:
        while t < t_event - 1e-12:
            h = min(step, t_event - t)
            state = _rk4_step(orbit, state, t, h)
            t += h
        t = t_event
        state[3:] += np.asarray(dv, dtype=float)
    return RelativeState.from_vector(state)


def _rk4_step(orbit: TargetOrbit, state: np.ndarray, t: float, h: float) -> np.ndarray:
    mu = orbit.mu
    ep_mid = solve_kepler(orbit, t + 0.5 * h)
    k1 = nonlinear_rhs(solve_kepler(orbit, t), state, mu)
    k2 = nonlinear_rhs(ep_mid, state + 0.5 * h * k1, mu)
    k3 = nonlinear_rhs(ep_mid, state + 0.5 * h * k2, mu)
    k4 = nonlinear_rhs(solve_kepler(orbit, t + h), state + h * k3, mu)
    return state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
