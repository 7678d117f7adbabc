"""Constructive steady-state computation and certification.

Pipeline: fix the machine-bus voltage phasors, Newton-solve the nodal
current balance for the load-bus voltages, read off the injected stator
currents and line currents, then recover each machine's rotor angle,
excitation current and inputs in closed form. The recovered point is
verified against the full-system residual and a set of numeric probes.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleSteadyStateError, LoadDomainError, SolverError
from .frame import ROT90, rot, rvec, wrap_angle
from .loads import equivariance_defect
from .machine import electrical_torque, stator_inductance
from .network import admittance, solve_branch_currents
from .system import (invariance_defect, residual, residual_block_norms,
                     tolerance_scale)

log = logging.getLogger("gridstate.steady_state")

RECOVERY_TOL = 1e-9          # relative residual allowed on the recovery equations
DEGENERACY_BAND = 1e-9       # relative band flagging nu ~ 0 / equal ellipse radii
CERT_RESIDUAL_TOL = 1e-9     # certificate: |residual|_inf <= tol * scale
CERT_INVARIANCE_TOL = 1e-5   # certificate: invariance defect <= tol * scale
CERT_INVARIANCE_STEP = 1e-7
CERT_EQUIVARIANCE_TOL = 1e-12


@dataclass
class NewtonOptions:
    tol: float = 1e-10
    max_iter: int = 50
    fd_step: float = 1e-6


@dataclass
class OperatingSpec:
    """Prescribed operating point: frequency, machine-bus voltage phasors
    (magnitude, angle in radians, machine order), rotor polarizations."""

    omega0: float
    gen_voltage_mag: np.ndarray
    gen_voltage_angle: np.ndarray
    sigma: np.ndarray
    newton: NewtonOptions = field(default_factory=NewtonOptions)

    def gen_voltages(self):
        """Machine-bus voltage pairs stacked into a 2*n_g vector."""
        out = np.empty(2 * len(self.gen_voltage_mag))
        out[0::2] = self.gen_voltage_mag * np.cos(self.gen_voltage_angle)
        out[1::2] = self.gen_voltage_mag * np.sin(self.gen_voltage_angle)
        return out


@dataclass
class NetworkSolution:
    """A point satisfying the rotating network equations."""

    i_s: np.ndarray
    v: np.ndarray
    i_T: np.ndarray
    residual_norm: float
    iterations: int
    residual_history: list


@dataclass
class MachineRecovery:
    """Closed-form machine steady state behind a solved network point.

    ``nu`` is the stator voltage left over after the impedance drop, i.e.
    the voltage the excitation winding must induce; ``case`` flags the
    degenerate branches (nu_zero, omega_zero, alpha_equal) next to the
    generic "regular" one.
    """

    theta: float
    i_f: float
    i_d: float
    i_q: float
    tau_m: float
    v_f: float
    nu: np.ndarray
    sigma: int
    case: str
    excitation_residual: float  # relative defect of the excitation equation
    alignment_residual: float   # relative defect of the angle alignment equation


@dataclass
class FullSteadyState:
    x: np.ndarray
    u: np.ndarray
    omega0: float
    recoveries: list
    network: NetworkSolution
    diagnostics: dict


@dataclass
class VerificationReport:
    residual_blocks: dict
    residual_inf: float
    scale: float
    invariance_defect: float
    equivariance_defects: list
    certificate: bool
    failures: list
    tolerances: dict

    def as_dict(self):
        return {
            "residual_blocks": self.residual_blocks,
            "residual_inf": self.residual_inf,
            "scale": self.scale,
            "invariance_defect": self.invariance_defect,
            "equivariance_defects": self.equivariance_defects,
            "certificate": self.certificate,
            "failures": self.failures,
            "tolerances": self.tolerances,
        }


@dataclass(frozen=True)
class RecoveryGeometry:
    """Rotor-frame decomposition of the stator voltage mismatch.

    Seen from the rotor, the voltage the excitation winding must induce is
    the sum of a component counter-rotating with the rotor angle (the
    round-rotor circuit) and one co-rotating with it (the saliency term).
    Together they trace an origin-centered ellipse as the angle sweeps.
    """

    round_part: np.ndarray
    salient_part: np.ndarray

    @property
    def round_mag(self):
        return float(np.linalg.norm(self.round_part))

    @property
    def round_angle(self):
        return float(np.arctan2(self.round_part[1], self.round_part[0]))

    @property
    def salient_mag(self):
        return float(np.linalg.norm(self.salient_part))

    @property
    def salient_angle(self):
        return float(np.arctan2(self.salient_part[1], self.salient_part[0]))


def recovery_geometry(p, v_term, i_s, omega0):
    """Split the excitation demand into its rotor-frame components."""
    v_term = np.asarray(v_term, dtype=float)
    i_s = np.asarray(i_s, dtype=float)
    round_drop = p.r_s * i_s + omega0 * p.l_s * (ROT90 @ i_s)
    round_part = ROT90.T @ (v_term - round_drop)
    salient_part = omega0 * p.l_sa * np.array([-i_s[0], i_s[1]])
    return RecoveryGeometry(round_part, salient_part)


def rotor_frame_mismatch(geom, theta):
    """Excitation demand seen in the rotor frame at angle theta (2-vector).

    Its second component must vanish at a steady-state rotor angle; its
    first component, divided by omega0*l_sf, is the excitation current.
    """
    return rot(theta).T @ geom.round_part + rot(theta) @ geom.salient_part


def excitation_demand(p, v_term, i_s, omega0, theta):
    """Stator voltage left for the excitation winding to induce:
    v - (r_s I + omega0 J L_s(theta)) i_s."""
    Zs = p.r_s * np.eye(2) + omega0 * ROT90 @ stator_inductance(p, theta)
    return np.asarray(v_term, dtype=float) - Zs @ np.asarray(i_s, dtype=float)


def recover_machine(p, v_term, i_s, omega0, sigma, tol=RECOVERY_TOL):
    """Closed-form rotor angle, excitation current and inputs for one machine
    given its terminal voltage and injected stator current.

    ``sigma`` in {-1, +1} picks between the two antipodal rotor angles; the
    excitation current carries the sign. Degenerate situations are returned
    flagged, not silently: a vanishing excitation demand (nu_zero), equal
    ellipse radii (alpha_equal), and zero frequency (omega_zero, feasible
    only when the terminal voltage exactly covers the resistive drop).
    """
    if sigma not in (-1, 1):
        raise ValueError(f"sigma must be -1 or +1, got {sigma!r}")
    v_term = np.asarray(v_term, dtype=float)
    i_s = np.asarray(i_s, dtype=float)
    v_scale = max(1.0, float(np.linalg.norm(v_term)))

    if omega0 == 0.0:
        nu = v_term - p.r_s * i_s
        if np.linalg.norm(nu) > tol * v_scale:
            raise InfeasibleSteadyStateError(
                "no steady state at zero frequency: the net stator voltage "
                f"|v - r_s i_s| = {np.linalg.norm(nu):.3e} is nonzero (any "
                "rotor angle and excitation current would leave it unbalanced)"
            )
        return _finalize_recovery(p, v_term, i_s, omega0, sigma,
                                  theta=0.0, i_f=0.0, case="omega_zero")

    geom = recovery_geometry(p, v_term, i_s, omega0)
    a_round, a_sal = geom.round_mag, geom.salient_mag
    if abs(a_round - a_sal) <= DEGENERACY_BAND * (a_round + a_sal):
        # Equal radii: the ellipse may collapse through the origin; the
        # aligned angle is determined by the two component directions alone.
        case = "alpha_equal"
        theta = 0.5 * (geom.round_angle - geom.salient_angle + np.pi)
    else:
        case = "regular"
        # Second rotor-frame component is linear in (cos, sin) of the angle.
        a = geom.salient_part[0] - geom.round_part[0]
        b = geom.round_part[1] + geom.salient_part[1]
        theta = float(np.arctan2(-b, a))

    aligned = rotor_frame_mismatch(geom, theta)
    i_f = float(aligned[0]) / (omega0 * p.l_sf)

    nu_now = excitation_demand(p, v_term, i_s, omega0, theta)
    if np.linalg.norm(nu_now) <= DEGENERACY_BAND * np.linalg.norm(v_term):
        return _finalize_recovery(p, v_term, i_s, omega0, sigma,
                                  theta=theta, i_f=0.0, case="nu_zero")

    if sigma * omega0 * p.l_sf * i_f < 0.0:
        # The two solutions are antipodal: advancing the angle by pi flips
        # the excitation current's sign. The polarization fixes the sign of
        # the product omega0 * l_sf * i_f, which at positive frequency is
        # just the sign of the excitation current.
        theta += np.pi
        i_f = -i_f
    return _finalize_recovery(p, v_term, i_s, omega0, sigma,
                              theta=theta, i_f=i_f, case=case, tol=tol)


def _finalize_recovery(p, v_term, i_s, omega0, sigma, theta, i_f, case,
                       tol=RECOVERY_TOL):
    nu = excitation_demand(p, v_term, i_s, omega0, theta)
    nu_norm = float(np.linalg.norm(nu))
    gauge = max(1.0, nu_norm)
    exc_res = abs(omega0 * p.l_sf * i_f - sigma * nu_norm) / gauge
    ali_res = float(np.linalg.norm(ROT90 @ rvec(theta) * nu_norm - sigma * nu)) / gauge
    if case in ("regular", "alpha_equal") and max(exc_res, ali_res) > tol:
        raise SolverError(
            f"machine recovery inconsistent: excitation residual {exc_res:.3e}, "
            f"alignment residual {ali_res:.3e} exceed {tol:.1e}"
        )
    if case in ("nu_zero", "omega_zero"):
        log.warning("machine recovery hit degenerate case %r; this does not "
                    "define a sensible operating point", case)
        exc_res = abs(omega0 * p.l_sf * i_f) / gauge
        ali_res = 0.0

    currents = np.array([i_s[0], i_s[1], i_f, 0.0, 0.0])
    tau_e = electrical_torque(p, theta, currents)
    return MachineRecovery(
        theta=float(theta), i_f=float(i_f), i_d=0.0, i_q=0.0,
        tau_m=float(p.d * omega0 + tau_e), v_f=float(p.r_f * i_f),
        nu=nu, sigma=int(sigma), case=case,
        excitation_residual=float(exc_res), alignment_residual=float(ali_res),
    )


def solve_network(sys, spec):
    """Solve the nodal current balance with machine-bus voltages pinned.

    Newton iteration on the load-bus voltage pairs (the machine-bus rows
    define the injected stator currents afterwards); the line currents then
    follow from the branch impedances. The Jacobian is built by forward
    differences; for impedance-only loads the balance is affine and the
    first step already lands on the solution.
    """
    n_g, n_v = sys.n_g, sys.n_v
    n_l = n_v - n_g
    opts = spec.newton
    omega0 = spec.omega0

    v = np.zeros(2 * n_v)
    v[:2 * n_g] = spec.gen_voltages()
    if n_l > 0:
        flat = float(np.mean(spec.gen_voltage_mag))
        v[2 * n_g + 0::2] = flat
        v[2 * n_g + 1::2] = 0.0

    def load_rows(v_full):
        Y = admittance(sys.network, sys.topology, sys.loads, v_full, omega0)
        return (Y @ v_full)[2 * n_g:]

    history = []
    iterations = 0
    if n_l > 0:
        for iterations in range(1, opts.max_iter + 1):
            try:
                f0 = load_rows(v)
                res = float(np.max(np.abs(f0)))
                history.append(res)
                gauge = max(1.0, float(np.max(np.abs(v))))
                log.debug("newton iter %d: residual %.3e", iterations, res)
                if res <= opts.tol * gauge:
                    break
                step = opts.fd_step * gauge
                jac = np.empty((2 * n_l, 2 * n_l))
                for col in range(2 * n_l):
                    vp = v.copy()
                    vp[2 * n_g + col] += step
                    jac[:, col] = (load_rows(vp) - f0) / step
            except LoadDomainError as err:
                raise SolverError(
                    f"network solve left a load's domain at iteration "
                    f"{iterations}: {err}"
                ) from err
            try:
                delta = np.linalg.solve(jac, -f0)
            except np.linalg.LinAlgError as err:
                raise SolverError(
                    f"singular Jacobian in network solve at iteration {iterations}"
                ) from err
            v[2 * n_g:] += delta
        else:
            raise SolverError(
                f"network solve did not converge in {opts.max_iter} iterations; "
                f"final residual {history[-1]:.3e}"
            )

    Y = admittance(sys.network, sys.topology, sys.loads, v, omega0)
    balance = Y @ v
    i_s = -balance[:2 * n_g]
    i_T = solve_branch_currents(sys.network, omega0, sys.incidence2.T @ v)
    res_norm = float(np.max(np.abs(balance[2 * n_g:]), initial=0.0))
    history.append(res_norm)
    return NetworkSolution(i_s=i_s, v=v, i_T=i_T, residual_norm=res_norm,
                           iterations=iterations, residual_history=history)


def recover_all(sys, spec, net):
    """Machine recoveries for every machine behind one network solution."""
    out = []
    for k, p in enumerate(sys.machines):
        v_k = net.v[2 * k:2 * k + 2]
        i_sk = net.i_s[2 * k:2 * k + 2]
        try:
            out.append(recover_machine(p, v_k, i_sk, spec.omega0,
                                       int(spec.sigma[k])))
        except SolverError as err:
            raise SolverError(f"machine {k + 1}: {err}") from err
    return out


def assemble_steady_state(sys, net, recoveries, omega0, tol=CERT_RESIDUAL_TOL):
    """Stack a network solution and machine recoveries into a full state and
    input, and verify the full-system residual meets the tolerance."""
    if len(recoveries) != sys.n_g:
        raise ValueError(f"need {sys.n_g} recoveries, got {len(recoveries)}")
    lay = sys.layout
    i = np.zeros((sys.n_g, 5))
    for k, rec in enumerate(recoveries):
        i[k, :2] = net.i_s[2 * k:2 * k + 2]
        i[k, 2] = rec.i_f
        i[k, 3] = rec.i_d
        i[k, 4] = rec.i_q
    x = lay.pack(
        np.array([rec.theta for rec in recoveries]),
        np.full(sys.n_g, omega0),
        i, net.v, net.i_T,
    )
    u = lay.pack_input([rec.tau_m for rec in recoveries],
                       [rec.v_f for rec in recoveries])

    rho = residual(sys, x, u, omega0)
    blocks = residual_block_norms(sys, rho)
    rho_inf = float(np.max(np.abs(rho)))
    scale = tolerance_scale(x, u)
    diagnostics = {"residual_blocks": blocks, "residual_inf": rho_inf,
                   "scale": scale}
    if rho_inf > tol * scale:
        detail = ", ".join(f"{k}={val:.3e}" for k, val in blocks.items())
        raise SolverError(
            f"assembled steady state fails verification: |residual|_inf = "
            f"{rho_inf:.3e} > {tol:.1e} * scale ({scale:.3e}); blocks: {detail}"
        )
    return FullSteadyState(x=x, u=u, omega0=omega0, recoveries=recoveries,
                           network=net, diagnostics=diagnostics)


def compute_steady_state(sys, spec):
    """Full pipeline: network solve, machine recovery, assembly."""
    net = solve_network(sys, spec)
    recoveries = recover_all(sys, spec, net)
    return assemble_steady_state(sys, net, recoveries, spec.omega0)


def verify_steady_state(sys, ss, h=CERT_INVARIANCE_STEP,
                        equivariance_samples=360):
    """Numeric certificate that (x, u) is a synchronous steady state.

    Three gates: the full-system residual vanishes (machine and network
    balance at frequency omega0), the residual is constant along the
    rotating flow (invariance probe), and every load commutes with
    rotations. All thresholds are relative to the state/input scale.
    """
    lay = sys.layout
    rho = residual(sys, ss.x, ss.u, ss.omega0)
    blocks = residual_block_norms(sys, rho)
    rho_inf = float(np.max(np.abs(rho)))
    scale = tolerance_scale(ss.x, ss.u)

    inv = invariance_defect(sys, ss.x, ss.u, ss.omega0, h=h)

    v = ss.x[lay.sl_v]
    equiv = []
    for k, load in enumerate(sys.loads):
        if getattr(load, "kind", "custom") == "none":
            equiv.append(0.0)
            continue
        vk = v[2 * k:2 * k + 2]
        gauge = max(1.0, float(np.linalg.norm(load.current(vk))))
        equiv.append(float(equivariance_defect(load, vk, equivariance_samples))
                     / gauge)

    failures = []
    if rho_inf > CERT_RESIDUAL_TOL * scale:
        worst = max(blocks, key=blocks.get)
        failures.append(
            f"residual {rho_inf:.3e} exceeds {CERT_RESIDUAL_TOL:.1e}*scale "
            f"(worst block: {worst} = {blocks[worst]:.3e})"
        )
    if blocks["frequency"] > CERT_RESIDUAL_TOL * scale:
        omega = ss.x[lay.sl_omega]
        failures.append(
            f"rotor speeds deviate from omega0: max |omega0 - omega| = "
            f"{float(np.max(np.abs(ss.omega0 - omega))):.3e}"
        )
    if inv > CERT_INVARIANCE_TOL * scale:
        failures.append(
            f"invariance defect {inv:.3e} exceeds "
            f"{CERT_INVARIANCE_TOL:.1e}*scale; the residual drifts along the "
            "rotating flow (non-constant inputs or non-conforming load)"
        )
    bad_loads = [sys.bus_ids[k] for k, d in enumerate(equiv)
                 if d > CERT_EQUIVARIANCE_TOL]
    if bad_loads:
        failures.append(
            f"load model at bus(es) {bad_loads!r} is not rotation-equivariant"
        )

    return VerificationReport(
        residual_blocks=blocks,
        residual_inf=rho_inf,
        scale=scale,
        invariance_defect=inv,
        equivariance_defects=equiv,
        certificate=not failures,
        failures=failures,
        tolerances={
            "residual": CERT_RESIDUAL_TOL,
            "invariance": CERT_INVARIANCE_TOL,
            "invariance_step": h,
            "equivariance": CERT_EQUIVARIANCE_TOL,
        },
    )


def reported_angle(theta):
    """Angles are kept unwrapped internally; wrap for reports only."""
    return float(wrap_angle(theta))
