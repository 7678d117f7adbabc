"""Numeric identity suite behind the steady-state theory.

Each identity is either an exact structural matrix equation or a
finite-difference check of a directional-derivative cancellation. The suite
is seeded, so failures reproduce exactly.
"""

from dataclasses import dataclass

import numpy as np

from .frame import MACHINE_ROT90, block_rotation_generator, \
    machine_rotation_generator
from .machine import MachineParams, electrical_torque, induced_voltage, \
    validate_params
from .steady_state import recovery_geometry, rotor_frame_mismatch
from .system import (bus_indicator, field_indicator, mass_matrix, residual,
                     steady_field, vector_field)

FD_STEP = 1e-6
FD_TOL = 1e-6
EXACT_TOL = 1e-14
ELLIPSE_TOL = 1e-12
RESIDUAL_TOL = 1e-10


@dataclass
class IdentityCheck:
    name: str
    max_defect: float
    tolerance: float
    passed: bool


def random_valid_params(rng):
    """Random machine constants with guaranteed positive-definite
    inductances (mutual couplings kept well inside the PD region)."""
    for _ in range(100):
        l_s = rng.uniform(0.5, 2.0)
        l_f = rng.uniform(0.5, 2.0)
        l_d = rng.uniform(0.5, 2.0)
        l_q = rng.uniform(0.5, 2.0)
        p = MachineParams(
            m=rng.uniform(0.1, 2.0), d=rng.uniform(0.05, 1.0),
            r_s=rng.uniform(0.05, 1.0), r_f=rng.uniform(0.05, 1.0),
            r_d=rng.uniform(0.05, 1.0), r_q=rng.uniform(0.05, 1.0),
            l_s=l_s, l_sa=rng.uniform(0.0, 0.25) * l_s,
            l_f=l_f, l_d=l_d, l_q=l_q,
            l_fd=0.25 * np.sqrt(l_f * l_d),
            l_sf=0.3 * np.sqrt(l_s * l_f),
            l_sd=0.2 * np.sqrt(l_s * l_d),
            l_sq=0.2 * np.sqrt(l_s * l_q),
        )
        if validate_params(p) is None:
            return p
    raise RuntimeError("failed to draw valid machine parameters")


def _machine_instances(sys, rng, n_samples):
    """Alternate the system's own machines with freshly drawn parameter sets
    so both the concrete system and the parameter family are exercised."""
    for idx in range(n_samples):
        if idx % 2 == 0:
            p = sys.machines[(idx // 2) % sys.n_g]
        else:
            p = random_valid_params(rng)
        theta = rng.uniform(-np.pi, np.pi)
        i = rng.uniform(-3.0, 3.0, size=5)
        omega0 = rng.uniform(0.5, 400.0) * rng.choice((-1.0, 1.0))
        yield p, theta, i, omega0


def torque_flow_derivative_defect(p, theta, i, omega0, h=FD_STEP):
    """The electrical torque is constant along the rotating flow: its
    directional derivative in (theta, currents) along (omega0, stator
    rotation) cancels. Central differences on both pieces."""
    d_theta = (electrical_torque(p, theta + h, i)
               - electrical_torque(p, theta - h, i)) / (2.0 * h) * omega0
    w = omega0 * (MACHINE_ROT90 @ i)
    d_i = (electrical_torque(p, theta, i + h * w)
           - electrical_torque(p, theta, i - h * w)) / (2.0 * h)
    gauge = max(1.0, abs(d_theta), abs(d_i))
    return abs(d_theta + d_i) / gauge


def induced_voltage_flow_derivative_defect(p, theta, i, omega0, h=FD_STEP):
    """Along the rotating flow the induced winding voltage itself rotates:
    its directional derivative equals the stator rotation applied to it."""
    omega = omega0
    d_theta = (induced_voltage(p, theta + h, omega, i)
               - induced_voltage(p, theta - h, omega, i)) / (2.0 * h) * omega0
    w = omega0 * (MACHINE_ROT90 @ i)
    d_i = (induced_voltage(p, theta, omega, i + h * w)
           - induced_voltage(p, theta, omega, i - h * w)) / (2.0 * h)
    rhs = omega0 * (MACHINE_ROT90 @ induced_voltage(p, theta, omega, i))
    gauge = max(1.0, float(np.max(np.abs(d_theta))), float(np.max(np.abs(d_i))),
                float(np.max(np.abs(rhs))))
    return float(np.max(np.abs(d_theta + d_i - rhs))) / gauge


def _random_state(sys, rng):
    lay = sys.layout
    omega0 = 2.0 * np.pi * rng.uniform(5.0, 60.0)
    x = lay.pack(
        rng.uniform(-np.pi, np.pi, sys.n_g),
        omega0 * (1.0 + 0.1 * rng.uniform(-1.0, 1.0, sys.n_g)),
        rng.uniform(-2.0, 2.0, 5 * sys.n_g),
        rng.uniform(-2.0, 2.0, 2 * sys.n_v) + np.tile([3.0, 0.0], sys.n_v),
        rng.uniform(-2.0, 2.0, 2 * sys.n_t),
    )
    u = rng.uniform(-2.0, 2.0, lay.n_u)
    return x, u, omega0


def run_identity_suite(sys, n_samples=120, seed=0):
    """Run all identity checks against a system; returns one row each."""
    rng = np.random.default_rng(seed)
    rows = []

    worst_torque = 0.0
    worst_vind = 0.0
    for p, theta, i, omega0 in _machine_instances(sys, rng, n_samples):
        worst_torque = max(worst_torque,
                           torque_flow_derivative_defect(p, theta, i, omega0))
        worst_vind = max(
            worst_vind,
            induced_voltage_flow_derivative_defect(p, theta, i, omega0))
    rows.append(IdentityCheck("torque constant along rotating flow",
                              worst_torque, FD_TOL, worst_torque <= FD_TOL))
    rows.append(IdentityCheck("induced voltage rotates along flow",
                              worst_vind, FD_TOL, worst_vind <= FD_TOL))

    # Structural operator identities (integer-structured, exact).
    n_g, n_v, n_t = sys.n_g, sys.n_v, sys.n_t
    Jg = machine_rotation_generator(n_g)
    Jv = block_rotation_generator(n_v)
    Jt = block_rotation_generator(n_t)
    Iv = bus_indicator(n_g, n_v)
    d1 = float(np.max(np.abs(Iv.T @ Jv - Jg @ Iv.T)))
    rows.append(IdentityCheck("bus selector commutes with rotations",
                              d1, EXACT_TOL, d1 <= EXACT_TOL))
    d2 = float(np.max(np.abs(sys.incidence2 @ Jt - Jv @ sys.incidence2)))
    rows.append(IdentityCheck("incidence commutes with rotations",
                              d2, EXACT_TOL, d2 <= EXACT_TOL))
    d3 = float(np.max(np.abs(Jg @ field_indicator(n_g))))
    rows.append(IdentityCheck("rotation annihilates excitation injection",
                              d3, EXACT_TOL, d3 <= EXACT_TOL))

    # Rotor-frame mismatch traces an origin-centered ellipse whose squared
    # radius never drops below the squared difference of the two component
    # magnitudes.
    worst_ellipse = 0.0
    for idx in range(n_samples):
        p = random_valid_params(rng) if idx % 2 else sys.machines[idx % sys.n_g]
        v = rng.uniform(-3.0, 3.0, 2)
        i_s = rng.uniform(-3.0, 3.0, 2)
        omega0 = rng.uniform(0.5, 400.0) * rng.choice((-1.0, 1.0))
        geom = recovery_geometry(p, v, i_s, omega0)
        bound = (geom.round_mag - geom.salient_mag) ** 2
        gauge = max(1.0, (geom.round_mag + geom.salient_mag) ** 2)
        for theta in rng.uniform(-np.pi, np.pi, 32):
            eps = rotor_frame_mismatch(geom, theta)
            shortfall = (bound - float(eps @ eps)) / gauge
            worst_ellipse = max(worst_ellipse, shortfall)
    rows.append(IdentityCheck("rotor-frame mismatch ellipse lower bound",
                              worst_ellipse, ELLIPSE_TOL,
                              worst_ellipse <= ELLIPSE_TOL))

    # Defining equation of the residual: mass matrix times the gap between
    # the steady-state and model vector fields.
    worst_res = 0.0
    for _ in range(max(10, n_samples // 10)):
        x, u, omega0 = _random_state(sys, rng)
        rho = residual(sys, x, u, omega0)
        gap = steady_field(sys, x, omega0) - vector_field(sys, x, u)
        alt = mass_matrix(sys, x) @ gap
        gauge = max(1.0, float(np.max(np.abs(rho))))
        worst_res = max(worst_res, float(np.max(np.abs(rho - alt))) / gauge)
    rows.append(IdentityCheck("residual equals mass-matrix field gap",
                              worst_res, RESIDUAL_TOL, worst_res <= RESIDUAL_TOL))
    return rows
