"""Time marching of the coupled farm: wind, wakes, platforms, drivetrains.

Each simulation step samples the free-stream wind, evaluates the waked
inflow at every rotor, runs the per-turbine controllers at their own
(coarser) rate, advances the platform and drivetrain dynamics, and then
propagates every wake by one transport step using the freshly updated
rotor states as boundary conditions.

The module also builds self-consistent steady farm states (per-turbine
trims coupled through the steady wake profiles), which serve as initial
conditions and as the operating points the controller banks are built
around.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .control import (
    MAX_POWER_MARGIN,
    TRACKING_MARGIN,
    TurbineController,
    available_power,
    design_power_coefficient,
    speed_reference,
)
from .geometry import ControlInputs, PlatformState, TurbineGeometry, as_vec2
from .mooring import net_mooring_force
from .params import ParameterSet
from .plant import (
    DrivetrainPropagator,
    DrivetrainState,
    hydro_drag,
    platform_acceleration,
    platform_step,
    radiation_force,
)
from .reduced_model import N_STATES, newton_solve, state_derivative
from .rotor import coefficient_lookup, power_output, thrust_force, aero_torque, tip_speed_ratio
from .wake import (
    WakeFieldSnapshot,
    effective_velocity,
    init_wake,
    set_boundary,
    step_wake,
)
from .wind import WindSeries, sample

#: Upper clamp on the thrust coefficient before conversion to induction;
#: the coefficient table exceeds 1 in deep-stall corners where momentum
#: theory has no real-valued induction.
_CT_CLAMP = 0.9999
_INDUCTION_CLAMP = 0.4999


class SimulationError(RuntimeError):
    """Simulation violated a structural invariant; message names step and unit."""


def induction_from_ct(ct: float) -> float:
    """Axial induction from the thrust coefficient, a = (1 - sqrt(1-Ct))/2."""
    ct = float(np.clip(ct, 0.0, _CT_CLAMP))
    return min(0.5 * (1.0 - np.sqrt(1.0 - ct)), _INDUCTION_CLAMP)


@dataclass
class TurbineOperatingPoint:
    """One turbine's steady solution inside a steady farm state."""

    inflow: np.ndarray          # effective wind vector at the rotor, m/s
    state: np.ndarray           # 15-state trim, displacements from home
    command: ControlInputs
    induction: float
    power: float


@dataclass
class FarmSteadyState:
    """Self-consistent steady farm: trims coupled through steady wakes."""

    layout: np.ndarray                      # (n, 2) home positions
    points: list[TurbineOperatingPoint]
    grids: list                             # steady wake grid per turbine
    iterations: int

    @property
    def inflow_speeds(self) -> np.ndarray:
        return np.array([float(np.hypot(*p.inflow)) for p in self.points])

    @property
    def farm_power(self) -> float:
        return float(sum(p.power for p in self.points))


def _steady_torque_residual(params: ParameterSet, inflow: np.ndarray,
                            power: float, beta_fixed: float | None,
                            omega_target: float | None):
    """Residual closure for a steady turbine under the constant-power law."""
    from .reduced_model import STATE_SCALES, DisturbanceInputs

    d0 = DisturbanceInputs(wind=inflow)
    eta = params.generator_efficiency

    def residual(z):
        if beta_fixed is None:
            xi, beta = z[:N_STATES], z[N_STATES]
        else:
            xi, beta = z, beta_fixed
        x = xi * STATE_SCALES
        torque = power / (eta * max(x[13], 1.0))
        u = ControlInputs(blade_pitch=float(beta), generator_torque=torque,
                          nacelle_yaw=0.0)
        core = state_derivative(x, u, d0, params) / STATE_SCALES
        if beta_fixed is None:
            return np.concatenate([core, [(x[13] - omega_target) / 10.0]])
        return core

    return residual, d0


def baseline_turbine_trim(inflow, params: ParameterSet,
                          k_design: float | None = None) -> TurbineOperatingPoint:
    """Steady state of one turbine under the baseline (no repositioning) policy.

    The pitch loop regulates the generator to its speed reference in
    every regime; the power setpoint is the rated ceiling or the margin
    times the available power, whichever is smaller.  Below rated the
    trim pitch comes out slightly feathered, absorbing the availability
    margin at the reference tip-speed ratio.  When the reference floor
    clip pins the speed above the tip-speed ratio that can deliver the
    setpoint, the governor rails at fine pitch and the speed floats on
    the torque balance instead; the trim mirrors that regime.
    """
    from .reduced_model import STATE_SCALES, TrimError

    inflow = as_vec2(inflow)
    if k_design is None:
        k_design = design_power_coefficient(params)
    speed = float(np.hypot(*inflow))
    avail = available_power(speed, k_design)
    rated = params.rated_power
    eta = params.generator_efficiency
    power = min(rated, MAX_POWER_MARGIN * avail)

    omega_target = speed_reference(speed, params)
    guess = np.zeros(N_STATES)
    guess[13] = omega_target
    guess[12] = omega_target / params.gear_ratio
    try:
        residual, _ = _steady_torque_residual(params, inflow, power,
                                              None, omega_target)
        z0 = np.concatenate([guess / STATE_SCALES, [-2.0]])
        z, _ = newton_solve(residual, z0)
        xi, beta = z[:N_STATES], float(z[N_STATES])
    except TrimError:
        # railed-governor regime: fine pitch, speed below the reference
        beta = 0.0
        guess[13] = 0.97 * omega_target
        guess[12] = guess[13] / params.gear_ratio
        residual, _ = _steady_torque_residual(params, inflow, power,
                                              beta, None)
        xi, _ = newton_solve(residual, guess / STATE_SCALES)

    x = xi * STATE_SCALES
    torque = power / (eta * x[13])
    tsr = tip_speed_ratio(params.aero, x[12], inflow - x[6:8])
    ct, _ = coefficient_lookup(params.aero, tsr, beta)
    command = ControlInputs(blade_pitch=beta, generator_torque=torque,
                            nacelle_yaw=0.0)
    return TurbineOperatingPoint(inflow=inflow, state=x, command=command,
                                 induction=induction_from_ct(ct),
                                 power=power_output(torque, x[13], eta))


def held_turbine_trim(inflow, y_target: float, power: float,
                      params: ParameterSet,
                      yaw_guess: float = 0.0) -> TurbineOperatingPoint:
    """Steady state of one turbine holding a lateral station via yaw."""
    from .reduced_model import trim_at_position

    from .reduced_model import TrimError

    inflow = as_vec2(inflow)
    speed = float(np.hypot(*inflow))
    omega_ref = speed_reference(speed, params)
    try:
        eq = trim_at_position(y_target, power, inflow, omega_ref, params,
                              yaw_guess=yaw_guess)
    except TrimError:
        # cold yaw seeds can strand the trim solver far from the held
        # branch; walk the station out from zero, re-seeding each step
        eq = None
        guess = 0.0
        n_leg = max(1, int(np.ceil(abs(y_target) / 15.0)))
        for y in np.linspace(0.0, y_target, n_leg + 1):
            eq = trim_at_position(float(y), power, inflow, omega_ref,
                                  params, yaw_guess=guess)
            guess = eq.inputs.nacelle_yaw
    x = eq.state
    tsr = tip_speed_ratio(params.aero, x[12], inflow - x[6:8])
    ct, _ = coefficient_lookup(params.aero, tsr, eq.inputs.blade_pitch)
    return TurbineOperatingPoint(
        inflow=inflow, state=x, command=eq.inputs,
        induction=induction_from_ct(ct),
        power=power_output(eq.inputs.generator_torque, x[13],
                           params.generator_efficiency))


@dataclass(frozen=True)
class StationSpec:
    """Steady-state request for one turbine inside a farm fixed point.

    y_target None selects the baseline policy (yaw held at zero); a
    number selects the station-holding trim at that sway displacement.
    power_target None applies the max-power availability policy; a
    number is capped by the tracking governor.
    """

    y_target: float | None = None
    power_target: float | None = None


def farm_steady_state(params: ParameterSet, layout, free_stream,
                      specs: list[StationSpec] | None = None,
                      extent_diameters: float = 15.0,
                      max_iterations: int = 60,
                      tolerance: float = 1e-9) -> FarmSteadyState:
    """Fixed point of per-turbine trims coupled through steady wakes.

    Iterates trim -> wake profile -> effective inflow until the inflow
    vectors stop changing.  The steady wake of each turbine uses the
    closed-form profile consistent with its induction and yaw.
    """
    layout = np.atleast_2d(np.asarray(layout, dtype=float))
    n = len(layout)
    free_stream = as_vec2(free_stream)
    if specs is None:
        specs = [StationSpec() for _ in range(n)]
    if len(specs) != n:
        raise ValueError("one StationSpec per turbine required")
    k_design = design_power_coefficient(params)

    inflows = [free_stream.copy() for _ in range(n)]
    points: list[TurbineOperatingPoint] = [None] * n
    yaw_seeds = [0.0] * n
    for iteration in range(1, max_iterations + 1):
        grids = []
        for i in range(n):
            spec = specs[i]
            if spec.y_target is None:
                points[i] = baseline_turbine_trim(inflows[i], params, k_design)
            else:
                speed = float(np.hypot(*inflows[i]))
                avail = available_power(speed, k_design)
                if spec.power_target is None:
                    power = min(params.rated_power, MAX_POWER_MARGIN * avail)
                else:
                    power = min(spec.power_target, TRACKING_MARGIN * avail)
                points[i] = held_turbine_trim(inflows[i], spec.y_target,
                                              power, params, yaw_seeds[i])
                yaw_seeds[i] = points[i].command.nacelle_yaw
            pos = layout[i] + points[i].state[0:2]
            geom = TurbineGeometry(index=i,
                                   rotor_diameter=params.aero.rotor_diameter,
                                   hub_height=params.hub_height)
            grids.append(init_wake(
                geom, points[i].inflow, points[i].induction,
                points[i].command.nacelle_yaw,
                extent_diameters=extent_diameters,
                owner_position=pos, owner_velocity=points[i].state[6:8]))

        snapshot = WakeFieldSnapshot(grids)
        positions = np.array([layout[i] + points[i].state[0:2]
                              for i in range(n)])
        new_inflows = [effective_velocity(snapshot, i, positions, free_stream)
                       for i in range(n)]
        shift = max(float(np.max(np.abs(new_inflows[i] - inflows[i])))
                    for i in range(n))
        inflows = new_inflows
        if shift < tolerance:
            return FarmSteadyState(layout=layout, points=points,
                                   grids=grids, iterations=iteration)
    raise SimulationError(
        f"steady farm state did not converge in {max_iterations} iterations "
        f"(last inflow shift {shift:.3e} m/s)")


@dataclass
class SimulationLog:
    """Dense per-step record of one farm run."""

    times: np.ndarray                 # (n_steps,)
    wind: np.ndarray                  # (n_steps, 2) free stream
    positions: np.ndarray             # (n_steps, n_turbines, 2) absolute
    commands: np.ndarray              # (n_steps, n_turbines, 3) beta/tau/gamma
    powers: np.ndarray                # (n_steps, n_turbines) electrical W
    effective_speeds: np.ndarray      # (n_steps, n_turbines) |waked inflow|
    generator_speeds: np.ndarray      # (n_steps, n_turbines) rad/s
    rotor_speeds: np.ndarray          # (n_steps, n_turbines) rad/s
    layout: np.ndarray                # (n_turbines, 2) home positions

    @property
    def farm_power(self) -> np.ndarray:
        return self.powers.sum(axis=1)

    @property
    def displacements(self) -> np.ndarray:
        return self.positions - self.layout[None, :, :]


class FarmSimulator:
    """Coupled farm integrator driven by per-turbine controllers.

    The per-step order is: sample wind, evaluate waked inflows, run the
    controllers (every control_substeps-th step), advance platforms and
    drivetrains, then advance every wake with the updated rotor states
    as boundary conditions.
    """

    def __init__(self, params: ParameterSet, steady: FarmSteadyState,
                 wind: WindSeries,
                 controllers: list[TurbineController],
                 dt: float = 0.5, control_substeps: int = 2,
                 wakes_enabled: bool = True):
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        if control_substeps < 1:
            raise ValueError("control_substeps must be at least 1")
        n = len(steady.points)
        if len(controllers) != n:
            raise ValueError(f"{n} turbines but {len(controllers)} controllers")
        self.params = params
        self.layout = steady.layout
        self.wind = wind
        self.dt = dt
        self.control_substeps = control_substeps
        self.wakes_enabled = wakes_enabled
        self.step_index = 0

        self.platforms = []
        self.drivetrains = []
        self.propagators = []
        self.grids = []
        self.controllers = controllers
        self.commands = []
        self.twists = []
        self.platform_accels = [np.zeros(2) for _ in range(n)]
        for i, point in enumerate(steady.points):
            x = point.state
            self.platforms.append(PlatformState(self.layout[i] + x[0:2],
                                                x[6:8]))
            self.drivetrains.append(DrivetrainState(
                rotor_speed=x[12], generator_speed=x[13],
                generator_efficiency=params.generator_efficiency,
                gear_ratio=params.gear_ratio, shaft_twist=x[14]))
            self.propagators.append(DrivetrainPropagator(
                dt, params.drivetrain, params.gear_ratio))
            self.grids.append(point_grid_copy(steady.grids[i]))
            self.commands.append(point.command.copy())
            controllers[i].seed_from(point.command, point.inflow)
        self._records = []

    @property
    def n_turbines(self) -> int:
        return len(self.platforms)

    @property
    def time(self) -> float:
        return self.step_index * self.dt

    def _measured_state(self, i: int) -> np.ndarray:
        x = np.zeros(N_STATES)
        x[0:2] = self.platforms[i].position - self.layout[i]
        x[6:8] = self.platforms[i].velocity
        x[12] = self.drivetrains[i].rotor_speed
        x[13] = self.drivetrains[i].generator_speed
        x[14] = self.drivetrains[i].shaft_twist
        return x

    def step(self) -> None:
        t = self.time
        dt = self.dt
        w = sample(self.wind, t)
        free = w.velocity
        free_speed = float(np.hypot(*free))

        positions = np.array([p.position for p in self.platforms])
        snapshot = WakeFieldSnapshot(self.grids, t)
        inflows = []
        for i in range(self.n_turbines):
            if self.wakes_enabled:
                inflows.append(effective_velocity(snapshot, i, positions, free))
            else:
                inflows.append(free.copy())

        if self.step_index % self.control_substeps == 0:
            t_ctrl = self.control_substeps * dt
            for i in range(self.n_turbines):
                self.commands[i] = self.controllers[i].step(
                    t, self._measured_state(i), inflows[i], t_ctrl)

        row_cmd = np.empty((self.n_turbines, 3))
        row_pow = np.empty(self.n_turbines)
        row_vef = np.empty(self.n_turbines)
        row_omg = np.empty(self.n_turbines)
        row_omr = np.empty(self.n_turbines)
        inductions = np.empty(self.n_turbines)
        for i in range(self.n_turbines):
            cmd = self.commands[i]
            plat = self.platforms[i]
            drive = self.drivetrains[i]
            v_rel = inflows[i] - plat.velocity
            tsr = tip_speed_ratio(self.params.aero, drive.rotor_speed, v_rel)
            ct, cq = coefficient_lookup(self.params.aero, tsr, cmd.blade_pitch)
            thrust = thrust_force(self.params.aero, v_rel, cmd.nacelle_yaw, ct)
            torque_aero = aero_torque(self.params.aero, v_rel, cq)
            drag = hydro_drag(self.params.hydro, plat.velocity) \
                + radiation_force(self.params.hydro, plat.velocity)
            moor = net_mooring_force(self.params.mooring,
                                     plat.position - self.layout[i])
            accel = platform_acceleration(thrust, drag, moor, self.params.hydro)
            self.platforms[i] = platform_step(plat, accel, dt)
            self.platform_accels[i] = accel
            self.drivetrains[i] = self.propagators[i].step(
                drive, torque_aero, cmd.generator_torque)
            inductions[i] = induction_from_ct(ct)

            new_state = self.drivetrains[i]
            if not (np.all(np.isfinite(self.platforms[i].position))
                    and np.isfinite(new_state.generator_speed)):
                raise SimulationError(
                    f"step {self.step_index} (t={t:.1f} s), turbine {i}: "
                    "non-finite platform or drivetrain state")

            row_cmd[i] = (cmd.blade_pitch, cmd.generator_torque,
                          cmd.nacelle_yaw)
            row_pow[i] = power_output(cmd.generator_torque,
                                      max(new_state.generator_speed, 0.0),
                                      self.params.generator_efficiency)
            row_vef[i] = float(np.hypot(*inflows[i]))
            row_omg[i] = new_state.generator_speed
            row_omr[i] = new_state.rotor_speed

        for i in range(self.n_turbines):
            set_boundary(self.grids[i], inflows[i], inductions[i],
                         self.commands[i].nacelle_yaw,
                         self.platforms[i].position,
                         self.platforms[i].velocity)
            self.grids[i] = step_wake(self.grids[i], free_speed,
                                      w.acceleration,
                                      self.platforms[i].velocity,
                                      self.platform_accels[i], dt)

        self._records.append((t, free.copy(),
                              np.array([p.position for p in self.platforms]),
                              row_cmd, row_pow, row_vef, row_omg, row_omr))
        self.step_index += 1

    def run(self, duration: float) -> SimulationLog:
        """March the farm for ``duration`` seconds and return the log."""
        n_steps = int(round(duration / self.dt))
        if abs(n_steps * self.dt - duration) > 1e-9:
            raise ValueError(
                f"duration {duration} s is not a multiple of dt {self.dt} s")
        for _ in range(n_steps):
            self.step()
        recs = self._records
        return SimulationLog(
            times=np.array([r[0] for r in recs]),
            wind=np.array([r[1] for r in recs]),
            positions=np.array([r[2] for r in recs]),
            commands=np.array([r[3] for r in recs]),
            powers=np.array([r[4] for r in recs]),
            effective_speeds=np.array([r[5] for r in recs]),
            generator_speeds=np.array([r[6] for r in recs]),
            rotor_speeds=np.array([r[7] for r in recs]),
            layout=self.layout.copy())


def point_grid_copy(grid):
    """Deep copy of a wake grid (module-level to keep __init__ tidy)."""
    return grid.copy()
