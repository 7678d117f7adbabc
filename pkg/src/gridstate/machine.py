"""Single synchronous machine: inductances, torque, induced voltage, dynamics.

Per-machine state is the rotor angle theta, rotor speed omega, and five
winding currents ordered (i_alpha, i_beta, i_f, i_d, i_q): the two stator
currents, the excitation current, and the two short-circuited damper
currents. All quantities are SI; there is no per-unit normalization.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .frame import MACHINE_ROT90, rot

_PD_GRID_POINTS = 64

# (name, lower bound is strict) sign domains; saliency may be zero.
_POSITIVE_FIELDS = (
    "m", "d", "r_s", "r_f", "r_d", "r_q",
    "l_s", "l_f", "l_d", "l_q", "l_fd", "l_sf", "l_sd", "l_sq",
)


@dataclass(frozen=True)
class MachineParams:
    """Electrical and mechanical constants of one synchronous machine.

    m, d          rotor inertia and mechanical damping
    r_s           stator winding resistance (per axis)
    r_f, r_d, r_q excitation and damper winding resistances
    l_s, l_sa     stator self inductance and rotor saliency (l_sa >= 0)
    l_f, l_d, l_q rotor self inductances
    l_fd          excitation-damper mutual inductance
    l_sf, l_sd, l_sq  stator-rotor mutual inductances
    """

    m: float
    d: float
    r_s: float
    r_f: float
    r_d: float
    r_q: float
    l_s: float
    l_sa: float
    l_f: float
    l_d: float
    l_q: float
    l_fd: float
    l_sf: float
    l_sd: float
    l_sq: float

    def resistance_diag(self):
        """Winding resistances as the diagonal of the 5x5 resistance matrix."""
        return np.array([self.r_s, self.r_s, self.r_f, self.r_d, self.r_q])

    def rotor_inductance(self):
        return np.array([
            [self.l_f, self.l_fd, 0.0],
            [self.l_fd, self.l_d, 0.0],
            [0.0, 0.0, self.l_q],
        ])

    def mutual_coupling(self):
        """Stator-rotor coupling before rotation by the rotor angle."""
        return np.array([
            [self.l_sf, self.l_sd, 0.0],
            [0.0, 0.0, -self.l_sq],
        ])


@dataclass
class MachineState:
    theta: float
    omega: float
    i_s: np.ndarray  # stator current pair (i_alpha, i_beta)
    i_f: float
    i_d: float
    i_q: float

    def currents(self):
        """Winding currents as a 5-vector (i_alpha, i_beta, i_f, i_d, i_q)."""
        return np.array([self.i_s[0], self.i_s[1], self.i_f, self.i_d, self.i_q])


@dataclass(frozen=True)
class ParamViolation:
    kind: str  # "sign" or "positive_definite"
    message: str
    theta: float | None = None
    eigenvalue: float | None = None


def stator_inductance(p, theta):
    """Rotor-position dependent 2x2 stator inductance."""
    sal = rot(2.0 * theta) @ np.diag([p.l_sa, -p.l_sa])
    return p.l_s * np.eye(2) + sal


def mutual_inductance(p, theta):
    """2x3 stator-rotor mutual inductance at rotor angle theta."""
    return rot(theta) @ p.mutual_coupling()


def inductance_matrix(p, theta):
    """Full symmetric 5x5 winding inductance matrix."""
    L = np.zeros((5, 5))
    L[:2, :2] = stator_inductance(p, theta)
    L[:2, 2:] = mutual_inductance(p, theta)
    L[2:, :2] = L[:2, 2:].T
    L[2:, 2:] = p.rotor_inductance()
    return L


def electrical_torque(p, theta, i):
    """Torque exerted on the rotor by the winding currents.

    Quadratic form in the currents built from the inductance matrix and the
    stator rotation generator.
    """
    L = inductance_matrix(p, theta)
    A = L @ MACHINE_ROT90 + MACHINE_ROT90.T @ L
    return 0.5 * float(i @ A @ i)


def induced_voltage(p, theta, omega, i):
    """5-vector of voltages induced in the windings by rotor motion."""
    L = inductance_matrix(p, theta)
    return omega * (L @ MACHINE_ROT90.T + MACHINE_ROT90 @ L) @ i


def machine_rhs(p, state, v_term, tau_m, v_f):
    """Time derivative of the 7 machine states (theta, omega, currents).

    The terminal pair enters the stator rows, the excitation voltage the
    field row; damper windings are short-circuited. The current derivative
    solves the winding flux balance through a symmetric factorization of the
    inductance matrix, recomputed each call (no stale-angle caching).
    """
    i = state.currents()
    L = inductance_matrix(p, state.theta)
    tau_e = electrical_torque(p, state.theta, i)
    v_ind = induced_voltage(p, state.theta, state.omega, i)

    applied = np.array([v_term[0], v_term[1], v_f, 0.0, 0.0])
    rhs = -p.resistance_diag() * i + applied - v_ind
    di = cho_solve(cho_factor(L, lower=True), rhs)

    dtheta = state.omega
    domega = (tau_m - p.d * state.omega - tau_e) / p.m
    return np.concatenate(([dtheta, domega], di))


def validate_params(p, n_theta=_PD_GRID_POINTS):
    """Check sign domains and positive definiteness of the inductances.

    Positive definiteness is sampled on a uniform rotor-angle grid; the
    eigenvalues of the inductance matrix are smooth and 2*pi-periodic in the
    angle, so a 64-point grid is ample at these matrix sizes. Returns None
    if everything passes, otherwise the first violation found.
    """
    for name in _POSITIVE_FIELDS:
        value = getattr(p, name)
        if not np.isfinite(value) or value <= 0.0:
            return ParamViolation("sign", f"{name} must be > 0, got {value!r}")
    if not np.isfinite(p.l_sa) or p.l_sa < 0.0:
        return ParamViolation("sign", f"l_sa must be >= 0, got {p.l_sa!r}")

    for theta in np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False):
        L = inductance_matrix(p, theta)
        try:
            np.linalg.cholesky(L)
        except np.linalg.LinAlgError:
            lam = float(np.linalg.eigvalsh(L)[0])
            return ParamViolation(
                "positive_definite",
                f"inductance matrix not positive definite at "
                f"theta={theta:.6f} (smallest eigenvalue {lam:.3e})",
                theta=float(theta),
                eigenvalue=lam,
            )
    return None
