"""Control-oriented 15-state turbine model: trim, linearization, discretization.

State vector (fixed order):

    0  surge x        (m)      6  surge rate   (m/s)   12 rotor speed omega_r (rad/s)
    1  sway y         (m)      7  sway rate    (m/s)   13 generator speed omega_g (rad/s)
    2  heave z        (m)      8  heave rate   (m/s)   14 shaft twist (rad)
    3  roll theta_x   (rad)    9  roll rate    (rad/s)
    4  pitch theta_y  (rad)   10  pitch rate   (rad/s)
    5  yaw theta_z    (rad)   11  yaw rate     (rad/s)

Surge/sway dynamics reuse the exact planar plant forces (thrust, quadratic
drag, radiation damping, catenary mooring), so the controller's model of
the horizontal motion matches the simulated farm identically.  Heave,
roll, pitch, and platform yaw are damped restoring DOFs driven one-way by
the hub-height thrust moments; they do not feed back into the rotor
aerodynamics, which keeps the planar subspace exact while the extra DOFs
stay physically plausible.

Trim and linearization work in normalized coordinates (lengths / 100 m,
angles / 0.1 rad, speeds / 10) so the Jacobian is well conditioned across
states spanning six orders of magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import expm

from floatfarm.geometry import ControlInputs, as_vec2
from floatfarm.params import ParameterSet
from floatfarm.plant import hydro_drag, radiation_force
from floatfarm.mooring import net_mooring_force
from floatfarm.rotor import aero_torque, coefficient_lookup, thrust_force, tip_speed_ratio

N_STATES = 15

STATE_NAMES = (
    "surge", "sway", "heave", "roll", "pitch", "yaw_platform",
    "surge_rate", "sway_rate", "heave_rate", "roll_rate", "pitch_rate",
    "yaw_rate", "rotor_speed", "generator_speed", "shaft_twist",
)

#: Normalization scales: lengths / 100, angles / 0.1, speeds / 10.
STATE_SCALES = np.array([100.0, 100.0, 100.0, 0.1, 0.1, 0.1,
                         10.0, 10.0, 10.0, 10.0, 10.0, 10.0,
                         10.0, 10.0, 0.1])

ANGLE_BOUND = np.radians(45.0)

TRIM_TOLERANCE = 1e-6


class TrimError(RuntimeError):
    """Newton iteration failed to reach the trim tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


def validate_state(x: np.ndarray) -> np.ndarray:
    """Plausibility screen: finite entries, angles within 45 degrees."""
    x = np.asarray(x, dtype=float)
    if x.shape != (N_STATES,):
        raise ValueError(f"state must have {N_STATES} entries, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("state contains non-finite entries")
    if np.any(np.abs(x[3:6]) > ANGLE_BOUND) or abs(x[14]) > ANGLE_BOUND:
        raise ValueError("platform angle outside the 45 degree plausibility bound")
    return x


@dataclass(frozen=True)
class DisturbanceInputs:
    """Exogenous inputs: wind vector and the (identically zero) wave channel."""

    wind: np.ndarray
    waves: np.ndarray = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "wind", as_vec2(self.wind))
        waves = np.zeros(2) if self.waves is None else np.asarray(self.waves, float)
        if np.any(waves != 0.0):
            raise ValueError("wave disturbance is a zero placeholder in this model")
        object.__setattr__(self, "waves", waves)


@dataclass(frozen=True)
class EquilibriumPoint:
    """A trimmed operating point (state, inputs, disturbance, residual)."""

    state: np.ndarray
    inputs: ControlInputs
    disturbance: DisturbanceInputs
    residual_norm: float

    def __post_init__(self) -> None:
        if self.residual_norm > TRIM_TOLERANCE:
            raise ValueError(
                f"equilibrium residual {self.residual_norm:.2e} above tolerance")


@dataclass(frozen=True)
class LinearModel:
    """State-space model about an equilibrium, in normalized state units.

    a: 15x15 over normalized states; b: 15x2 over (blade pitch deg,
    nacelle yaw deg); c_dist: 15x2 over the wind vector in m/s.
    sample_time None marks continuous time; discretize() sets it.
    """

    a: np.ndarray
    b: np.ndarray
    c_dist: np.ndarray
    equilibrium: EquilibriumPoint
    sample_time: float | None = None

    def __post_init__(self) -> None:
        for name, mat, shape in (("a", self.a, (N_STATES, N_STATES)),
                                 ("b", self.b, (N_STATES, 2)),
                                 ("c_dist", self.c_dist, (N_STATES, 2))):
            if mat.shape != shape or not np.all(np.isfinite(mat)):
                raise ValueError(f"matrix {name} has wrong shape or non-finite entries")
        if self.sample_time is None:
            growth = np.max(np.linalg.eigvals(self.a).real)
            if growth > 0.5:
                raise ValueError(f"unstable linearization: max Re eig = {growth:.3f}")


def state_derivative(x: np.ndarray, u: ControlInputs, d: DisturbanceInputs,
                     params: ParameterSet) -> np.ndarray:
    """Right-hand side of the 15-state model, physical units."""
    x = np.asarray(x, dtype=float)
    pos = x[0:2]
    vel = x[6:8]
    omega_r, omega_g, twist = x[12], x[13], x[14]
    ratio = params.gear_ratio
    aero = params.aero

    v_rel = d.wind - vel
    tsr = tip_speed_ratio(aero, omega_r, v_rel)
    ct, cq = coefficient_lookup(aero, tsr, u.blade_pitch)
    thrust = thrust_force(aero, v_rel, u.nacelle_yaw, ct)
    torque_aero = aero_torque(aero, v_rel, cq)

    drag = hydro_drag(params.hydro, vel) + radiation_force(params.hydro, vel)
    mooring = net_mooring_force(params.mooring, pos)
    acc_xy = (thrust + drag + mooring) / params.hydro.total_mass

    def axis(dof, displacement, rate, forcing=0.0):
        restoring = -dof.stiffness * displacement
        damping = -dof.linear_damping * rate - dof.quadratic_drag * abs(rate) * rate
        return (forcing + restoring + damping) / dof.total_inertia

    p = params.platform
    h = params.hub_height
    acc_heave = axis(p.heave, x[2], x[8])
    acc_roll = axis(p.roll, x[3], x[9], forcing=-h * thrust[1])
    acc_pitch = axis(p.pitch, x[4], x[10], forcing=h * thrust[0])
    acc_yaw = axis(p.yaw, x[5], x[11])

    dt_p = params.drivetrain
    internal = dt_p.shaft_stiffness * twist + dt_p.shaft_damping * (omega_r - omega_g / ratio)
    omega_r_dot = (torque_aero - internal) / dt_p.rotor_inertia
    omega_g_dot = (internal / ratio - u.generator_torque) / dt_p.generator_inertia

    out = np.empty(N_STATES)
    out[0:2] = vel
    out[2] = x[8]
    out[3:6] = x[9:12]
    out[6:8] = acc_xy
    out[8] = acc_heave
    out[9:12] = (acc_roll, acc_pitch, acc_yaw)
    out[12] = omega_r_dot
    out[13] = omega_g_dot
    out[14] = omega_r - omega_g / ratio
    return out


def normalized_derivative(xi: np.ndarray, u: ControlInputs, d: DisturbanceInputs,
                          params: ParameterSet) -> np.ndarray:
    """state_derivative conjugated by the normalization scales."""
    return state_derivative(xi * STATE_SCALES, u, d, params) / STATE_SCALES


def jacobian(fun, x0: np.ndarray, rel_step: float = 1e-6,
             abs_step: float = 1e-8) -> np.ndarray:
    """Central finite-difference Jacobian with per-coordinate steps."""
    x0 = np.asarray(x0, dtype=float)
    f0 = np.asarray(fun(x0), dtype=float)
    jac = np.empty((f0.size, x0.size))
    for j in range(x0.size):
        h = max(rel_step * abs(x0[j]), abs_step)
        xp, xm = x0.copy(), x0.copy()
        xp[j] += h
        xm[j] -= h
        jac[:, j] = (np.asarray(fun(xp)) - np.asarray(fun(xm))) / (2.0 * h)
    return jac


def newton_solve(residual, z0: np.ndarray, tol: float = TRIM_TOLERANCE,
                 max_iter: int = 100, max_step: float = 0.5) -> tuple[np.ndarray, float]:
    """Damped Newton iteration with least-squares steps and backtracking.

    Steps are capped at max_step in normalized units (a trust region for
    the strongly nonlinear mooring force); residual evaluations that
    raise (e.g. a taut line during an aggressive step) are treated as
    failed line-search points.
    """
    z = np.asarray(z0, dtype=float).copy()
    r = np.asarray(residual(z), dtype=float)
    norm = float(np.max(np.abs(r)))
    for _ in range(max_iter):
        if norm <= tol:
            return z, norm
        jac = jacobian(residual, z)
        step, *_ = np.linalg.lstsq(jac, -r, rcond=None)
        biggest = float(np.max(np.abs(step)))
        if biggest > max_step:
            step *= max_step / biggest
        scale = 1.0
        for _ in range(10):
            try:
                r_try = np.asarray(residual(z + scale * step), dtype=float)
            except (ValueError, ArithmeticError):
                scale *= 0.5
                continue
            norm_try = float(np.max(np.abs(r_try)))
            if norm_try < norm or norm_try <= tol:
                z = z + scale * step
                r, norm = r_try, norm_try
                break
            scale *= 0.5
        else:
            break
    if norm <= tol:
        return z, norm
    raise TrimError(f"no convergence after {max_iter} iterations, "
                    f"residual {norm:.3e}", norm)


def trim(u0: ControlInputs, d0: DisturbanceInputs, guess: np.ndarray,
         params: ParameterSet) -> EquilibriumPoint:
    """Equilibrium of the full model at fixed inputs and disturbance."""
    xi0 = np.asarray(guess, dtype=float) / STATE_SCALES

    def residual(xi):
        return normalized_derivative(xi, u0, d0, params)

    xi, norm = newton_solve(residual, xi0)
    return EquilibriumPoint(state=xi * STATE_SCALES, inputs=u0,
                            disturbance=d0, residual_norm=norm)


def trim_at_position(y_target: float, power_target: float, wind,
                     omega_g_ref: float, params: ParameterSet,
                     yaw_guess: float = 0.0, state_guess: np.ndarray | None = None
                     ) -> EquilibriumPoint:
    """Find the equilibrium holding a lateral position at a power level.

    Solves jointly for the state, blade pitch, and nacelle yaw such that
    the platform rests at y_target, the generator runs at omega_g_ref,
    and electrical power equals power_target through the constant-power
    torque law.  Surge is free (set by the thrust/mooring balance).
    """
    d0 = DisturbanceInputs(wind=as_vec2(wind))
    eta = params.generator_efficiency
    if state_guess is None:
        state_guess = np.zeros(N_STATES)
        state_guess[1] = y_target
        state_guess[12] = omega_g_ref / params.gear_ratio
        state_guess[13] = omega_g_ref

    def unpack(z):
        xi, beta, yaw = z[:N_STATES], z[N_STATES], z[N_STATES + 1]
        x = xi * STATE_SCALES
        torque = power_target / (eta * max(x[13], 1.0))
        u = ControlInputs(blade_pitch=beta, generator_torque=torque,
                          nacelle_yaw=yaw)
        return x, u

    def residual(z):
        x, u = unpack(z)
        r = np.empty(N_STATES + 2)
        r[:N_STATES] = state_derivative(x, u, d0, params) / STATE_SCALES
        r[N_STATES] = (x[1] - y_target) / 100.0
        r[N_STATES + 1] = (x[13] - omega_g_ref) / 10.0
        return r

    z0 = np.concatenate([np.asarray(state_guess) / STATE_SCALES,
                         [-2.0, yaw_guess]])
    z, norm = newton_solve(residual, z0)
    x_eq, u_eq = unpack(z)
    return EquilibriumPoint(state=x_eq, inputs=u_eq, disturbance=d0,
                            residual_norm=norm)


def linearize(eq: EquilibriumPoint, params: ParameterSet) -> LinearModel:
    """Jacobians about the equilibrium by central differences."""
    xi0 = eq.state / STATE_SCALES
    u0, d0 = eq.inputs, eq.disturbance

    a = jacobian(lambda xi: normalized_derivative(xi, u0, d0, params), xi0)

    def input_map(p):
        u = ControlInputs(blade_pitch=p[0], generator_torque=u0.generator_torque,
                          nacelle_yaw=p[1])
        return normalized_derivative(xi0, u, d0, params)

    b = jacobian(input_map, np.array([u0.blade_pitch, u0.nacelle_yaw]))

    def wind_map(w):
        return normalized_derivative(xi0, u0, DisturbanceInputs(wind=w), params)

    c = jacobian(wind_map, d0.wind.copy())
    return LinearModel(a=a, b=b, c_dist=c, equilibrium=eq)


def discretize(model: LinearModel, sample_time: float) -> LinearModel:
    """Exact zero-order-hold map via the augmented matrix exponential."""
    if sample_time <= 0.0:
        raise ValueError("sample time must be positive")
    n, m, p = N_STATES, 2, 2
    aug = np.zeros((n + m + p, n + m + p))
    aug[:n, :n] = model.a
    aug[:n, n:n + m] = model.b
    aug[:n, n + m:] = model.c_dist
    phi = expm(aug * sample_time)
    return replace(model, a=phi[:n, :n], b=phi[:n, n:n + m],
                   c_dist=phi[:n, n + m:], sample_time=sample_time)
