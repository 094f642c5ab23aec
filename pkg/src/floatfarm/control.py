"""Per-turbine control: receding-horizon repositioning plus power regulation.

Each turbine runs two loops at the controller rate.  A model-predictive
regulator steers blade pitch and nacelle yaw so the platform drifts to
its commanded lateral station while the generator stays inside its speed
band; it predicts with a linearization of the fifteen-state model taken
at the trim for the active station.  A separate power loop turns the
power setpoint into generator torque through the constant-power law,
governed by the availability of the (filtered) local wind.  A small
protection stack trims both commands near the speed-band edges so the
emitted commands never violate the machine envelope.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import ControlInputs, InputLimits, as_vec2
from .params import ParameterSet
from .qp import QpError, QpProblem, solve_qp
from .reduced_model import (
    N_STATES,
    STATE_SCALES,
    EquilibriumPoint,
    LinearModel,
    discretize,
    linearize,
    trim_at_position,
)
from .rotor import coefficient_lookup

#: Tip-speed ratio the torque schedule is designed around.
DESIGN_TSR = 5.6
#: Cap on tracked power as a fraction of instantaneous availability.
TRACKING_MARGIN = 0.9
#: Backoff from full availability in maximum-power operation; keeps the
#: torque-speed crossing strictly on the stable flank.
MAX_POWER_MARGIN = 0.97
#: Wind-speed filter time constant, s.
WIND_FILTER_TAU = 30.0
#: Generator-speed measurement filter time constant, s.  Chosen jointly
#: with the governor gains: the constant-power torque law has negative
#: incremental damping, and closing it over the raw (torsion-carrying)
#: speed at the 1 s control cadence pumps the shaft mode; too slow a
#: filter instead lags the rigid-body pitch loop into instability.
SPEED_FILTER_TAU = 0.5
#: Additional smoothing on the speed slope used for protection lead, s;
#: keeps aliased torsion out of the differentiated signal.
SLOPE_FILTER_TAU = 3.0
#: Lookahead applied to the filtered speed slope before the protection
#: stack, s; buys the pitch actuator lead time at its rate limit.
PROTECT_LEAD = 3.0
#: Distance from the speed ceiling where the torque boost engages, rad/s.
SPEED_PROTECT_MARGIN = 15.0 * np.pi / 30.0
#: Distance from the speed ceiling where the feather trim engages, rad/s.
#: Wider than the torque margin: pitch needs lead time at its rate limit.
PITCH_PROTECT_MARGIN = 60.0 * np.pi / 30.0
#: Headroom factor between the speed reference ceiling and the hard bound.
SPEED_REFERENCE_CEILING = 0.93
#: Headroom factor between the speed reference floor and the hard bound.
SPEED_REFERENCE_FLOOR = 1.12
#: Below this fraction of the lower speed bound the torque command holds.
TORQUE_FLOOR_FRACTION = 0.95
#: Feathering gain of the overspeed trim, deg per rad/s of excess.
_FEATHER_GAIN = 8.0
#: Torque boost gain near the speed ceiling, fraction per rad/s of excess.
_BOOST_GAIN = 0.5

_OUTPUT_ROWS = (0, 1, 13)  # surge, sway, generator speed (normalized states)
# heave, platform angles, and their rates: one-way-coupled states the
# planar plant does not expose as measurements
_MODEL_INTERNAL_STATES = np.array([2, 3, 4, 5, 8, 9, 10, 11])


def design_power_coefficient(params: ParameterSet) -> float:
    """Electrical availability constant k with P_avail = k * V^3."""
    _, cq = coefficient_lookup(params.aero, DESIGN_TSR, 0.0)
    cp = cq * DESIGN_TSR
    return (0.5 * params.aero.air_density * params.aero.rotor_area * cp
            * params.generator_efficiency)


def available_power(speed: float, k_design: float) -> float:
    return k_design * max(speed, 0.0) ** 3


def effective_power_target(mode: str, p_target: float, availability: float,
                           rated_power: float) -> float:
    """Power setpoint after the availability governor.

    'max' mode produces at (backed-off) availability up to rated; 'track'
    mode follows the allocated target but never demands more than 90% of
    what the wind can supply.
    """
    if mode == "max":
        return min(rated_power, MAX_POWER_MARGIN * availability)
    if mode == "track":
        return min(p_target, TRACKING_MARGIN * availability)
    raise ValueError(f"unknown power mode {mode!r}")


def speed_reference(speed: float, params: ParameterSet) -> float:
    """Generator-speed setpoint tracking the design tip-speed ratio."""
    lim = params.limits
    raw = params.gear_ratio * DESIGN_TSR * speed / (params.aero.rotor_diameter / 2.0)
    return float(np.clip(raw, SPEED_REFERENCE_FLOOR * lim.omega_g_min,
                         SPEED_REFERENCE_CEILING * lim.omega_g_max))


def torque_command(power: float, omega_g: float, efficiency: float,
                   limits: InputLimits, previous: float, dt: float
                   ) -> tuple[float, bool]:
    """Constant-power torque with saturation, rate limit, and a speed floor.

    Below the floor the previous torque is held (flag True): dividing by a
    collapsing speed would command a torque spike that stalls the rotor
    further.
    """
    floor = TORQUE_FLOOR_FRACTION * limits.omega_g_min
    if omega_g < floor:
        return previous, True
    tau = power / (efficiency * omega_g)
    tau = float(np.clip(tau, limits.torque_min, limits.torque_max))
    tau = float(np.clip(tau, previous - limits.torque_rate * dt,
                        previous + limits.torque_rate * dt))
    return tau, False


def overspeed_pitch_trim(omega_g: float, limits: InputLimits) -> float:
    """Additional feather (negative pitch) once inside the ceiling margin."""
    excess = omega_g - (limits.omega_g_max - PITCH_PROTECT_MARGIN)
    if excess <= 0.0:
        return 0.0
    return -_FEATHER_GAIN * excess


def protective_torque(tau: float, omega_g: float, limits: InputLimits) -> float:
    """Boost braking torque near the ceiling, shed it near the floor.

    The floor shed is quadratic in the remaining gap so braking collapses
    fast once the speed dips into the guard band; torque cannot push the
    rotor through the lower bound because aero torque is non-negative.
    """
    excess = omega_g - (limits.omega_g_max - SPEED_PROTECT_MARGIN)
    if excess > 0.0:
        tau = tau * (1.0 + _BOOST_GAIN * excess)
    low_edge = 1.08 * limits.omega_g_min
    if omega_g < low_edge:
        gap = max(omega_g - limits.omega_g_min, 0.0) / (0.08 * limits.omega_g_min)
        tau = tau * gap * gap
    return float(np.clip(tau, limits.torque_min, limits.torque_max))


class WindFilter:
    """First-order low-pass on the effective wind speed seen by one rotor."""

    def __init__(self, tau: float = WIND_FILTER_TAU):
        self.tau = tau
        self.value: float | None = None

    def update(self, speed: float, dt: float) -> float:
        if self.value is None:
            self.value = float(speed)
        else:
            alpha = dt / (self.tau + dt)
            self.value += alpha * (float(speed) - self.value)
        return self.value


class PitchGovernor:
    """PI collective-pitch speed governor for baseline (no-MPC) operation.

    Output is restricted to the feathering side: below rated the error is
    negative, the command clips to fine pitch (0 deg), and the integrator
    is clamped so it cannot wind up.
    """

    def __init__(self, kp: float = 1.2, ki: float = 0.3):
        self.kp = kp
        self.ki = ki
        self.integral = 0.0

    def step(self, omega_g: float, omega_ref: float, dt: float,
             limits: InputLimits) -> float:
        error = omega_g - omega_ref
        self.integral += error * dt
        beta = -(self.kp * error + self.ki * self.integral)
        if beta <= limits.beta_min:
            beta = limits.beta_min
            self.integral -= error * dt
        elif beta >= limits.beta_max:
            beta = limits.beta_max
            if error < 0.0:
                self.integral -= error * dt
        return beta


@dataclass(frozen=True)
class MpcConfig:
    """Horizon, weights, and bound handling of the position regulator."""

    prediction_horizon: int = 40
    control_horizon: int = 10
    sample_time: float = 1.0
    q_weights: tuple[float, float, float] = (1.0, 1.0, 0.1)
    r_weights: tuple[float, float] = (10.0, 50.0)
    s_weights: tuple[float, float] = (1.0, 5.0)
    slack_penalty: float = 1.0e4
    bound_stride: int = 4
    surge_bound: float = 160.0
    sway_bound: float = 130.0

    def __post_init__(self) -> None:
        if self.control_horizon > self.prediction_horizon:
            raise ValueError("control horizon longer than prediction horizon")
        if self.sample_time <= 0.0:
            raise ValueError("sample time must be positive")


@dataclass(frozen=True)
class MpcResult:
    blade_pitch: float
    nacelle_yaw: float
    converged: bool
    iterations: int
    objective: float
    slack_max: float


def build_mpc_qp(model: LinearModel, state_norm: np.ndarray,
                 u_prev: tuple[float, float], wind_offset: np.ndarray,
                 limits: InputLimits, config: MpcConfig,
                 output_ref: np.ndarray | None = None,
                 input_ref: np.ndarray | None = None) -> QpProblem:
    """Condense the receding-horizon program onto the input moves.

    Decision vector: Nm pitch/yaw moves followed by six shared slacks
    (upper/lower for surge, sway, generator speed).  State deviations are
    measured from the model's own equilibrium; the wind offset enters as
    a constant disturbance through the model's wind channel.

    output_ref (normalized) and input_ref (physical pitch/yaw) shift the
    regulated outputs and the input-deviation anchor away from the
    model's own equilibrium.  That is how an intermediate-station model
    steers toward a final station outside its linear neighborhood: the
    local model supplies the dynamics, the references point at the goal.
    """
    if model.sample_time is None:
        raise ValueError("MPC needs a discrete-time model")
    n_p, n_m = config.prediction_horizon, config.control_horizon
    ad, bd, cd = model.a, model.b, model.c_dist
    eq = model.equilibrium

    xi_eq = eq.state / STATE_SCALES
    dx0 = np.asarray(state_norm, dtype=float) - xi_eq
    u_eq = np.array([eq.inputs.blade_pitch, eq.inputs.nacelle_yaw])
    du_prev = np.asarray(u_prev, dtype=float) - u_eq
    ref = (np.zeros(3) if output_ref is None
           else np.asarray(output_ref, dtype=float))
    # input anchor expressed as a deviation from the model's equilibrium
    u_anchor = (np.zeros(2) if input_ref is None
                else np.asarray(input_ref, dtype=float) - u_eq)

    n_moves = 2 * n_m
    n_z = n_moves + 6
    c_sel = np.zeros((3, N_STATES))
    for row, idx in enumerate(_OUTPUT_ROWS):
        c_sel[row, idx] = 1.0

    q = np.diag(config.q_weights)
    r = np.diag(config.r_weights)
    s = np.diag(config.s_weights)

    # cumulative move selectors: du_k = du_prev + L_k z_m
    selectors = []
    acc = np.zeros((2, n_moves))
    for k in range(n_p):
        if k < n_m:
            blk = np.zeros((2, n_moves))
            blk[:, 2 * k:2 * k + 2] = np.eye(2)
            acc = acc + blk
        selectors.append(acc.copy())

    hess = np.zeros((n_z, n_z))
    grad = np.zeros(n_z)
    rows: list[np.ndarray] = []
    bounds: list[float] = []

    # input deviation cost and absolute input box over the control horizon
    for k in range(n_p):
        l_k = selectors[k]
        hess[:n_moves, :n_moves] += 2.0 * l_k.T @ s @ l_k
        grad[:n_moves] += 2.0 * l_k.T @ s @ (du_prev - u_anchor)
        if k < n_m:
            blk = np.zeros((2, n_moves))
            blk[:, 2 * k:2 * k + 2] = np.eye(2)
            hess[:n_moves, :n_moves] += 2.0 * blk.T @ r @ blk
            u_abs = u_eq + du_prev  # = previous applied input
            for j, (lo, hi, rate) in enumerate((
                    (limits.beta_min, limits.beta_max, limits.beta_rate),
                    (limits.yaw_min, limits.yaw_max, limits.yaw_rate))):
                sel = np.zeros(n_z)
                sel[:n_moves] = l_k[j]
                rows.append(sel)
                bounds.append(hi - u_abs[j])
                rows.append(-sel)
                bounds.append(u_abs[j] - lo)
                move = np.zeros(n_z)
                move[2 * k + j] = 1.0
                step = rate * config.sample_time
                rows.append(move)
                bounds.append(step)
                rows.append(-move)
                bounds.append(step)

    # state propagation and output cost
    scale = STATE_SCALES
    out_lo = np.array([-config.surge_bound / scale[0],
                       -config.sway_bound / scale[1],
                       (limits.omega_g_min + SPEED_PROTECT_MARGIN) / scale[13]])
    out_hi = np.array([config.surge_bound / scale[0],
                       config.sway_bound / scale[1],
                       (limits.omega_g_max - SPEED_PROTECT_MARGIN) / scale[13]])
    const = dx0.copy()
    sens = np.zeros((N_STATES, n_moves))
    wind_term = cd @ np.asarray(wind_offset, dtype=float)
    for k in range(1, n_p + 1):
        prev_sel = selectors[k - 1]
        const = ad @ const + bd @ du_prev + wind_term
        sens = ad @ sens + bd @ prev_sel
        y_const = c_sel @ const
        y_sens = c_sel @ sens
        block = np.zeros((3, n_z))
        block[:, :n_moves] = y_sens
        hess += 2.0 * block.T @ q @ block
        grad += 2.0 * block.T @ q @ (y_const - ref)
        if k % config.bound_stride == 0:
            # soft bounds on the outputs, shared slack per side
            xi_out = xi_eq[list(_OUTPUT_ROWS)]
            for j in range(3):
                row_hi = np.zeros(n_z)
                row_hi[:n_moves] = y_sens[j]
                row_hi[n_moves + 2 * j] = -1.0
                rows.append(row_hi)
                bounds.append(out_hi[j] - xi_out[j] - y_const[j])
                row_lo = np.zeros(n_z)
                row_lo[:n_moves] = -y_sens[j]
                row_lo[n_moves + 2 * j + 1] = -1.0
                rows.append(row_lo)
                bounds.append(xi_out[j] + y_const[j] - out_lo[j])

    for j in range(6):
        hess[n_moves + j, n_moves + j] += 2.0 * config.slack_penalty
        sel = np.zeros(n_z)
        sel[n_moves + j] = -1.0
        rows.append(sel)
        bounds.append(0.0)

    hess = 0.5 * (hess + hess.T) + 1e-10 * np.eye(n_z)
    return QpProblem(hess, grad, np.vstack(rows), np.asarray(bounds))


def mpc_step(model: LinearModel, state_norm: np.ndarray,
             u_prev: tuple[float, float], wind_offset: np.ndarray,
             limits: InputLimits, config: MpcConfig,
             output_ref: np.ndarray | None = None,
             input_ref: np.ndarray | None = None) -> MpcResult:
    """One receding-horizon update; holds the previous input on failure."""
    problem = build_mpc_qp(model, state_norm, u_prev, wind_offset,
                           limits, config, output_ref, input_ref)
    try:
        sol = solve_qp(problem)
    except QpError:
        return MpcResult(u_prev[0], u_prev[1], False, 0, np.nan, np.nan)
    if not sol.converged:
        return MpcResult(u_prev[0], u_prev[1], False, sol.iterations,
                         sol.objective, float(np.max(sol.z[-6:])))
    move = sol.z[:2]
    return MpcResult(float(u_prev[0] + move[0]), float(u_prev[1] + move[1]),
                     True, sol.iterations, sol.objective,
                     float(np.max(sol.z[-6:])))


def power_coupled(model: LinearModel, power: float,
                  params: ParameterSet) -> LinearModel:
    """Fold the constant-power torque feedback into the speed dynamics.

    The prediction model treats generator torque as frozen, but at run
    time the power loop applies tau = P / (eta * omega), so a speed sag
    raises braking torque.  d(tau)/d(omega) = -P / (eta * omega^2) enters
    the generator-speed row as a destabilizing self-term the regulator
    must know about.
    """
    if model.sample_time is not None:
        raise ValueError("apply the power coupling before discretizing")
    omega0 = model.equilibrium.state[13]
    gain = power / (params.generator_efficiency * omega0 ** 2
                    * params.drivetrain.generator_inertia)
    a = model.a.copy()
    a[13, 13] += gain
    return LinearModel(a=a, b=model.b, c_dist=model.c_dist,
                       equilibrium=model.equilibrium)


#: Sway distance between consecutive bank stations, m.  Small enough that
#: each local model is engaged within its linear neighborhood.
STATION_SPACING = 15.0


def station_models(y_final: float, power: float, wind, params: ParameterSet,
                   omega_ref: float, sample_time: float = 1.0,
                   y_start: float = 0.0,
                   spacing: float = STATION_SPACING) -> tuple[LinearModel, ...]:
    """Discrete prediction models at stations from y_start to y_final.

    Consecutive trims seed each other (state and yaw continuation), so
    the chain fails loudly if any intermediate station is not holdable.
    """
    span = y_final - y_start
    if abs(span) < 1e-9:
        stations = np.array([y_start])
    else:
        n_hops = max(1, int(np.ceil(abs(span) / spacing)))
        stations = y_start + span * np.arange(n_hops + 1) / n_hops
    models = []
    guess_state = None
    guess_yaw = 0.0
    for y_i in stations:
        eq = trim_at_position(float(y_i), power, wind, omega_ref, params,
                              yaw_guess=guess_yaw, state_guess=guess_state)
        guess_state = eq.state
        guess_yaw = eq.inputs.nacelle_yaw
        local = power_coupled(linearize(eq, params), power, params)
        models.append(discretize(local, sample_time))
    return tuple(models)


@dataclass
class StationTarget:
    """One commanded operating station for a turbine.

    models holds the linearization bank covering the path from the rest
    position to the station; the controller hard-switches to the entry
    nearest the measured sway.
    """

    lateral: float
    power: float
    models: tuple[LinearModel, ...]
    activation_time: float = 0.0

    def nearest_model(self, sway: float) -> LinearModel:
        gaps = [abs(sway - m.equilibrium.state[1]) for m in self.models]
        return self.models[int(np.argmin(gaps))]

    @property
    def final_inputs(self) -> np.ndarray:
        u = self.models[-1].equilibrium.inputs
        return np.array([u.blade_pitch, u.nacelle_yaw])


@dataclass
class TurbineController:
    """Composite per-turbine controller (power loop + optional MPC)."""

    params: ParameterSet
    power_mode: str = "max"
    power_target: float = 0.0
    stations: list[StationTarget] = field(default_factory=list)
    mpc_config: MpcConfig = field(default_factory=MpcConfig)
    use_mpc: bool = True

    def __post_init__(self) -> None:
        self.k_design = design_power_coefficient(self.params)
        self.wind_filter = WindFilter()
        self.speed_filter = WindFilter(tau=SPEED_FILTER_TAU)
        self.slope_filter = WindFilter(tau=SLOPE_FILTER_TAU)
        self.speed_slope = 0.0
        self.governor = PitchGovernor()
        self.previous = ControlInputs(0.0, 0.0, 0.0)
        self.records: list[dict] = []
        if self.use_mpc and not self.stations:
            raise ValueError("MPC controller needs at least one station target")

    def active_station(self, t: float) -> StationTarget:
        live = [s for s in self.stations if t >= s.activation_time]
        return live[-1] if live else self.stations[0]

    def seed_from(self, command: ControlInputs, inflow) -> None:
        """Align internal state with a steady operating point.

        Prevents a start-up transient: the rate limiter references the
        steady command, the wind filter starts converged, and the pitch
        governor's integrator reproduces the steady pitch at zero error.
        """
        self.previous = command.copy()
        self.wind_filter.value = float(np.hypot(*as_vec2(inflow)))
        self.slope_filter.value = 0.0
        self.speed_slope = 0.0
        self.governor.integral = -command.blade_pitch / self.governor.ki

    def step(self, t: float, state: np.ndarray, wind: np.ndarray,
             dt: float) -> ControlInputs:
        """Advance the controller by one sample and emit limit-respecting commands."""
        lim = self.params.limits
        previous_omega = self.speed_filter.value
        omega_g = self.speed_filter.update(float(state[13]), dt)
        raw_slope = (0.0 if previous_omega is None
                     else (omega_g - previous_omega) / dt)
        self.speed_slope = self.slope_filter.update(raw_slope, dt)
        speed = float(np.hypot(*np.asarray(wind, dtype=float)))
        v_hat = self.wind_filter.update(speed, dt)
        avail = available_power(v_hat, self.k_design)
        p_eff = effective_power_target(self.power_mode, self.power_target,
                                       avail, self.params.rated_power)
        omega_ref = speed_reference(v_hat, self.params)

        tau, floor_hold = torque_command(
            p_eff, omega_g, self.params.generator_efficiency, lim,
            self.previous.generator_torque, dt)

        degraded = False
        if self.use_mpc:
            station = self.active_station(t)
            model = station.nearest_model(float(state[1]))
            # heave/roll/pitch/platform-yaw and their rates are internal to
            # the prediction model, not measured; hold them at the active
            # equilibrium (they do not feed back on the planar dynamics)
            state = np.asarray(state, dtype=float).copy()
            state[_MODEL_INTERNAL_STATES] = \
                model.equilibrium.state[_MODEL_INTERNAL_STATES]
            wind_offset = (np.asarray(wind, dtype=float)
                           - model.equilibrium.disturbance.wind)
            # steer sway toward the final station; surge and speed track
            # the local equilibrium
            ref = np.array([
                0.0,
                (station.lateral - model.equilibrium.state[1]) / STATE_SCALES[1],
                0.0,
            ])
            result = mpc_step(model, np.asarray(state) / STATE_SCALES,
                              (self.previous.blade_pitch,
                               self.previous.nacelle_yaw),
                              wind_offset, lim, self.mpc_config, ref,
                              station.final_inputs)
            beta, gamma = result.blade_pitch, result.nacelle_yaw
            degraded = not result.converged
        else:
            beta = self.governor.step(omega_g, omega_ref, dt, lim)
            gamma = 0.0
            result = None

        # protections act on a short-horizon speed prediction so the
        # rate-limited actuators start moving before the bound is reached
        ahead = omega_g + PROTECT_LEAD * self.speed_slope
        beta = beta + overspeed_pitch_trim(ahead, lim)
        tau = protective_torque(tau, ahead, lim)

        command = ControlInputs(beta, tau, gamma).clipped(lim)
        command = command.rate_limited(self.previous, dt, lim)
        self.previous = command
        self.records.append({
            "t": t, "wind_filtered": v_hat, "available_power": avail,
            "power_setpoint": p_eff, "omega_ref": omega_ref,
            "floor_hold": floor_hold, "mpc_degraded": degraded,
            "mpc_iterations": getattr(result, "iterations", 0),
        })
        return command
