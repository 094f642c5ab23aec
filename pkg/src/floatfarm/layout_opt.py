"""Centralized lateral-layout search driven by fixed-induction episodes.

The farm-level optimizer explores per-turbine lateral targets with a
generalized pattern search.  Candidates are scored by simplified
simulation episodes: blade pitch and generator torque are replaced by a
constant axial induction, and a proportional yaw law steers each
platform toward its target, so only the layout's aerodynamic merit
enters the score.  A frozen wind realization makes candidate scores
comparable within one search.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .control import MAX_POWER_MARGIN, available_power, design_power_coefficient
from .geometry import PlatformState, TurbineGeometry, projected_speed
from .mooring import LineTautError, movable_range, net_mooring_force
from .params import ParameterSet
from .plant import hydro_drag, platform_acceleration, platform_step, radiation_force
from .reduced_model import TrimError
from .rotor import thrust_force
from .simulator import held_turbine_trim
from .wake import (
    WakeFieldSnapshot,
    effective_velocity,
    init_wake,
    set_boundary,
    step_wake,
    upstream_set,
    wake_tube,
)
from .wind import sample, synthesize

#: Axial induction pinned during search episodes, the fleet-average
#: operating value; thrust and power follow from momentum theory.
FIXED_INDUCTION = 0.3
#: C_t = 4 a (1 - a) at the pinned induction, asserted inside episodes.
FIXED_CT = 4.0 * FIXED_INDUCTION * (1.0 - FIXED_INDUCTION)
#: Margin kept below full taut reach when deriving the bounds box, m.
BOUNDS_TAUT_MARGIN = 5.0
#: Fraction of the yaw saturation a steady hold may occupy; what remains
#: is headroom for disturbance rejection around the held station.
YAW_HOLD_FRACTION = 58.0 / 60.0
#: Window-mean distance from target beyond which an episode counts as a
#: failed repositioning, m.
UNREACHED_TOLERANCE = 10.0
#: Proportional yaw gain near the target, deg per m of lateral error.
STEER_GAIN = 0.4
#: Error scale that doubles the steering gain, m (gain scheduling).
STEER_DISTANCE = 60.0


class EpisodeError(RuntimeError):
    """Episode simulation failed structurally; message echoes the candidate."""


class LayoutSearchError(RuntimeError):
    """Pattern search could not produce a feasible incumbent."""


class AllocationError(ValueError):
    """Farm power demand exceeds what the winning layout can supply."""


@dataclass(frozen=True)
class Setpoints:
    """Per-turbine targets emitted by the farm controller.

    Longitudinal positions are not searched (surge floats on the thrust
    and mooring balance), so only lateral targets and optional power
    targets are carried.
    """

    lateral: tuple[float, ...]
    power: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "lateral",
                           tuple(float(y) for y in self.lateral))
        if self.power is not None:
            if len(self.power) != len(self.lateral):
                raise ValueError("one power target per lateral target required")
            object.__setattr__(self, "power",
                               tuple(float(p) for p in self.power))


@dataclass(frozen=True)
class EpisodeSpec:
    """Recipe for one candidate-evaluation episode."""

    wind: object                  # WindSpec; frozen seed across one search
    duration: float = 2000.0
    induction: float = FIXED_INDUCTION
    window_fraction: float = 0.25
    dt: float = 1.0
    wakes_enabled: bool = True

    def __post_init__(self) -> None:
        if self.duration <= 0.0:
            raise ValueError("episode duration must be positive")
        if not 0.0 < self.induction < 0.5:
            raise ValueError("induction must lie in (0, 0.5)")
        if not 0.0 < self.window_fraction <= 1.0:
            raise ValueError("window fraction must lie in (0, 1]")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")


@dataclass(frozen=True)
class Objective:
    """Episode scoring mode.

    'maximize' scores window-average farm power (MW); 'projected' scores
    the summed effective wind speed projected onto the rotor discs
    (m/s); 'track' scores the negative absolute farm-power error (MW)
    with a quadratic yaw penalty discouraging large displacements.  All
    modes subtract a penalty on rotor-disc wake overlap.
    """

    mode: str
    farm_target: float = 0.0
    yaw_weight: float = 1.0e-3      # MW per deg^2, track mode
    overlap_weight: float = 0.1     # score units per unit overlap fraction

    def __post_init__(self) -> None:
        if self.mode not in ("maximize", "projected", "track"):
            raise ValueError(f"unknown objective mode {self.mode!r}")
        if self.mode == "track" and self.farm_target <= 0.0:
            raise ValueError("track mode needs a positive farm target")


@dataclass
class EpisodeResult:
    """Score plus the window-averaged per-turbine metrics behind it."""

    score: float
    code: str
    powers: np.ndarray        # fixed-induction electrical surrogate, W
    speeds: np.ndarray        # projected effective speeds, m/s
    yaws: np.ndarray          # nacelle yaw, deg
    lateral: np.ndarray       # sway displacement from home, m
    overlap: float            # summed rotor overlap area fraction


def disc_overlap_fraction(r_disc: float, r_tube: float, distance: float) -> float:
    """Fraction of a rotor disc covered by a wake tube (circle-circle lens)."""
    d = abs(distance)
    if d >= r_disc + r_tube:
        return 0.0
    if d <= abs(r_tube - r_disc):
        lens = math.pi * min(r_disc, r_tube) ** 2
    else:
        a1 = r_disc**2 * math.acos((d**2 + r_disc**2 - r_tube**2)
                                   / (2.0 * d * r_disc))
        a2 = r_tube**2 * math.acos((d**2 + r_tube**2 - r_disc**2)
                                   / (2.0 * d * r_tube))
        cut = 0.5 * math.sqrt((-d + r_disc + r_tube) * (d + r_disc - r_tube)
                              * (d - r_disc + r_tube) * (d + r_disc + r_tube))
        lens = a1 + a2 - cut
    return lens / (math.pi * r_disc**2)


def _steering_yaw(thrust_mag: float, lateral_pull: float, error: float,
                  yaw_bound: float) -> float:
    """Yaw command: equilibrium hold at the current spot plus steering.

    The hold term cancels the mooring's lateral pull through the thrust
    direction; the proportional term, with gain growing with distance,
    saturates into full-authority transit when the target is far.
    """
    if thrust_mag > 0.0:
        ratio = np.clip(-lateral_pull / thrust_mag, -1.0, 1.0)
        hold = math.degrees(math.asin(ratio))
    else:
        hold = 0.0
    gain = STEER_GAIN * (1.0 + abs(error) / STEER_DISTANCE)
    return float(np.clip(hold + gain * error, -yaw_bound, yaw_bound))


def evaluate_candidate(setpoints: Setpoints, episode: EpisodeSpec,
                       objective: Objective, params: ParameterSet,
                       layout) -> EpisodeResult:
    """Score one candidate layout by a fixed-induction episode.

    Runs the platform and wake dynamics with C_t pinned by the episode
    induction and the proportional yaw law steering toward the targets;
    the score averages the objective over the trailing window.
    Infeasible runs (taut mooring, divergence, unreached targets) score
    -inf with a reason code instead of raising.
    """
    layout = np.atleast_2d(np.asarray(layout, dtype=float))
    n = len(layout)
    if len(setpoints.lateral) != n:
        raise ValueError(f"{n} turbines but {len(setpoints.lateral)} targets")
    a = episode.induction
    ct = 4.0 * a * (1.0 - a)
    if a == FIXED_INDUCTION:
        assert ct == FIXED_CT
    cp = 4.0 * a * (1.0 - a) ** 2
    aero = params.aero
    lim = params.limits
    eta = params.generator_efficiency
    radius = 0.5 * aero.rotor_diameter
    power_scale = 0.5 * aero.air_density * aero.rotor_area * cp * eta
    targets = np.asarray(setpoints.lateral, dtype=float)

    series = synthesize(replace(episode.wind, duration=episode.duration,
                                sample_dt=episode.dt))
    n_steps = int(round(episode.duration / episode.dt))
    window_start = episode.duration * (1.0 - episode.window_fraction)

    platforms = [PlatformState(layout[i].copy(), np.zeros(2)) for i in range(n)]
    yaws = np.zeros(n)
    accels = [np.zeros(2) for _ in range(n)]
    geoms = [TurbineGeometry(i, rotor_diameter=aero.rotor_diameter,
                             hub_height=params.hub_height) for i in range(n)]

    grids = None
    if episode.wakes_enabled:
        grids = [init_wake(geoms[i], series.velocities[0], a, 0.0,
                           owner_position=layout[i]) for i in range(n)]

    sums = {"power": np.zeros(n), "speed": np.zeros(n), "yaw": np.zeros(n),
            "yaw_sq": np.zeros(n), "lateral": np.zeros(n), "overlap": 0.0}
    n_window = 0

    def infeasible(code):
        nan = np.full(n, np.nan)
        return EpisodeResult(score=-np.inf, code=code, powers=nan.copy(),
                             speeds=nan.copy(), yaws=nan.copy(),
                             lateral=nan.copy(), overlap=np.nan)

    try:
        for k in range(n_steps):
            t = k * episode.dt
            w = sample(series, t)
            free = w.velocity
            free_speed = float(np.hypot(*free))
            n_inf = free / free_speed

            positions = [p.position for p in platforms]
            if episode.wakes_enabled:
                snapshot = WakeFieldSnapshot(grids, t)
                inflows = [effective_velocity(snapshot, i, positions, free,
                                              geoms) for i in range(n)]
            else:
                inflows = [free.copy() for _ in range(n)]

            in_window = t >= window_start
            overlap_step = 0.0
            speeds_step = np.empty(n)
            for i in range(n):
                plat = platforms[i]
                pos_i = plat.position
                v_rel = inflows[i] - plat.velocity
                thrust_mag = (0.125 * ct * math.pi * aero.air_density
                              * aero.rotor_diameter**2 * float(v_rel @ v_rel))
                moor = net_mooring_force(params.mooring, pos_i - layout[i])
                err = targets[i] - (pos_i[1] - layout[i][1])
                cmd = _steering_yaw(thrust_mag, float(moor[1]), err,
                                    lim.yaw_max)
                yaws[i] = float(np.clip(cmd,
                                        yaws[i] - lim.yaw_rate * episode.dt,
                                        yaws[i] + lim.yaw_rate * episode.dt))
                speeds_step[i] = max(projected_speed(v_rel, yaws[i]), 0.0)
                if in_window and episode.wakes_enabled:
                    for q in upstream_set(i, positions, n_inf):
                        x_hat = float((pos_i - grids[q].owner_position) @ n_inf)
                        if 0.0 < x_hat <= grids[q].extent:
                            center, diameter = wake_tube(grids[q], x_hat)
                            overlap_step += disc_overlap_fraction(
                                radius, 0.5 * diameter, pos_i[1] - center)

                thrust = thrust_force(aero, v_rel, yaws[i], ct)
                drag = hydro_drag(params.hydro, plat.velocity) \
                    + radiation_force(params.hydro, plat.velocity)
                accels[i] = platform_acceleration(thrust, drag, moor,
                                                  params.hydro)
                platforms[i] = platform_step(plat, accels[i], episode.dt)
                if not np.all(np.isfinite(platforms[i].position)):
                    return infeasible("diverged")

            if episode.wakes_enabled:
                for i in range(n):
                    set_boundary(grids[i], inflows[i], a, yaws[i],
                                 platforms[i].position, platforms[i].velocity)
                    grids[i] = step_wake(grids[i], free_speed, w.acceleration,
                                         platforms[i].velocity, accels[i],
                                         episode.dt)

            if in_window:
                n_window += 1
                powers_step = np.minimum(power_scale * speeds_step**3,
                                         params.rated_power)
                sums["power"] += powers_step
                sums["speed"] += speeds_step
                sums["yaw"] += yaws
                sums["yaw_sq"] += yaws**2
                sums["lateral"] += np.array(
                    [platforms[i].position[1] - layout[i][1] for i in range(n)])
                sums["overlap"] += overlap_step
    except LineTautError:
        return infeasible("mooring_taut")
    except (ValueError, FloatingPointError) as exc:
        raise EpisodeError(
            f"candidate {tuple(setpoints.lateral)} failed: {exc}") from exc

    powers = sums["power"] / n_window
    speeds = sums["speed"] / n_window
    yaw_mean = sums["yaw"] / n_window
    lateral = sums["lateral"] / n_window
    overlap = sums["overlap"] / n_window
    if np.max(np.abs(lateral - targets)) > UNREACHED_TOLERANCE:
        return infeasible("target_unreached")

    penalty = objective.overlap_weight * overlap
    if objective.mode == "maximize":
        score = float(np.sum(powers)) / 1.0e6 - penalty
    elif objective.mode == "projected":
        score = float(np.sum(speeds)) - penalty
    else:
        error = abs(float(np.sum(powers)) - objective.farm_target) / 1.0e6
        yaw_cost = objective.yaw_weight * float(np.sum(sums["yaw_sq"])
                                                / n_window)
        score = -error - yaw_cost - penalty
    return EpisodeResult(score=score, code="ok", powers=powers, speeds=speeds,
                         yaws=yaw_mean, lateral=lateral, overlap=float(overlap))


@dataclass
class EvalRecord:
    """One pattern-search evaluation for the trace file."""

    candidate: tuple[float, ...]
    score: float
    code: str
    wall_time: float


@dataclass
class SearchResult:
    """Incumbent, its score, and the complete evaluation history."""

    best: tuple[float, ...]
    score: float
    trace: list[EvalRecord]
    evaluations: int
    final_mesh: float
    seed: int | None = None


def pattern_search(initial, bounds, evaluate, budget: int,
                   initial_mesh: float = 16.0, mesh_tolerance: float = 1.0,
                   parallel: bool = True) -> SearchResult:
    """Generalized pattern search (maximization) over a bounds box.

    Polls the 2*dim axis directions from the incumbent at the current
    mesh size; any strict improvement moves the incumbent and doubles
    the mesh, otherwise the mesh halves.  Terminates below the mesh
    tolerance or on budget exhaustion.  ``evaluate`` maps a candidate
    tuple to (score, code); candidates outside the bounds are recorded
    as infeasible without spending budget.
    """
    if budget < 1:
        raise ValueError("budget must allow at least one evaluation")
    lower, upper = (np.asarray(b, dtype=float) for b in bounds)
    incumbent = np.asarray(initial, dtype=float)
    dim = len(incumbent)
    if np.any(incumbent < lower) or np.any(incumbent > upper):
        raise LayoutSearchError(f"initial point {tuple(incumbent)} outside "
                                f"the bounds box")
    trace: list[EvalRecord] = []
    used = 0

    def timed_eval(point):
        start = time.perf_counter()
        score, code = evaluate(tuple(point))
        return score, code, time.perf_counter() - start

    best_score, code, wall = timed_eval(incumbent)
    used += 1
    trace.append(EvalRecord(tuple(incumbent), best_score, code, wall))
    if not np.isfinite(best_score):
        raise LayoutSearchError(
            f"initial point {tuple(incumbent)} infeasible ({code})")

    mesh = float(initial_mesh)
    while mesh >= mesh_tolerance and used < budget:
        polls = []
        for j in range(dim):
            for sign in (1.0, -1.0):
                cand = incumbent.copy()
                cand[j] += sign * mesh
                polls.append(cand)
        feasible = []
        for cand in polls:
            if np.any(cand < lower) or np.any(cand > upper):
                trace.append(EvalRecord(tuple(cand), -np.inf, "bounds", 0.0))
            else:
                feasible.append(cand)
        feasible = feasible[:budget - used]

        if parallel and len(feasible) > 1:
            with ThreadPoolExecutor(max_workers=len(feasible)) as pool:
                outcomes = list(pool.map(timed_eval, feasible))
        else:
            outcomes = [timed_eval(cand) for cand in feasible]
        used += len(feasible)

        improved = None
        for cand, (score, code, wall) in zip(feasible, outcomes):
            trace.append(EvalRecord(tuple(cand), score, code, wall))
            if score > best_score and (improved is None
                                       or score > improved[1]):
                improved = (cand, score)
        if improved is not None:
            incumbent, best_score = improved[0], improved[1]
            mesh *= 2.0
        else:
            mesh *= 0.5

    return SearchResult(best=tuple(incumbent), score=best_score, trace=trace,
                        evaluations=used, final_mesh=mesh)


def lateral_authority(params: ParameterSet, inflow_speed: float,
                      yaw_fraction: float = YAW_HOLD_FRACTION,
                      step: float = 5.0) -> float:
    """Largest holdable sway magnitude at an inflow, with yaw headroom.

    Walks the held-station trim outward until the steady yaw exceeds
    the allotted fraction of the saturation, then interpolates the
    crossing.  Symmetric in sign by the mooring's mirror symmetry.
    """
    k_design = design_power_coefficient(params)
    power = min(params.rated_power,
                MAX_POWER_MARGIN * available_power(inflow_speed, k_design))
    cap = yaw_fraction * params.limits.yaw_max
    prev_y, prev_yaw = 0.0, 0.0
    guess = 0.0
    y = step
    while y < movable_range(params.mooring, (0.0, 1.0)):
        try:
            pt = held_turbine_trim((inflow_speed, 0.0), y, power, params,
                                   yaw_guess=guess)
        except (TrimError, ValueError):
            break
        yaw = abs(pt.command.nacelle_yaw)
        if yaw >= cap:
            frac = (cap - prev_yaw) / (yaw - prev_yaw)
            return prev_y + frac * (y - prev_y)
        prev_y, prev_yaw = y, yaw
        guess = pt.command.nacelle_yaw
        y += step
    return prev_y


def layout_bounds(params: ParameterSet, inflow_speeds) -> tuple[np.ndarray,
                                                                np.ndarray]:
    """Per-turbine lateral target bounds, recomputed from the plant.

    The box is the intersection of the mooring's taut-limited movable
    range (with a safety margin) and the yaw-authority reach at each
    turbine's inflow, so every target inside it is statically holdable
    with headroom left for disturbance rejection.
    """
    taut = min(movable_range(params.mooring, (0.0, 1.0),
                             margin=BOUNDS_TAUT_MARGIN),
               movable_range(params.mooring, (0.0, -1.0),
                             margin=BOUNDS_TAUT_MARGIN))
    reach = np.array([min(taut, lateral_authority(params, float(v)))
                      for v in inflow_speeds])
    return -reach, reach


def optimize_layout(params: ParameterSet, layout, objective: Objective,
                    wind_spec, budget: int = 40, initial=None,
                    episode: EpisodeSpec | None = None,
                    inflow_speeds=None, parallel: bool = True
                    ) -> tuple[SearchResult, EpisodeResult]:
    """Run the full farm-level search and return incumbent plus metrics.

    Bounds are recomputed at startup from the mooring and yaw-authority
    reach; the same frozen wind realization scores every candidate.
    The winning episode's metrics are returned for power allocation.
    """
    layout = np.atleast_2d(np.asarray(layout, dtype=float))
    n = len(layout)
    if episode is None:
        episode = EpisodeSpec(wind=wind_spec)
    if inflow_speeds is None:
        inflow_speeds = [float(np.hypot(*wind_spec.mean_velocity))] * n
    bounds = layout_bounds(params, inflow_speeds)
    if initial is None:
        initial = np.zeros(n)

    cache: dict[tuple[float, ...], EpisodeResult] = {}

    def evaluate(candidate):
        result = evaluate_candidate(Setpoints(candidate), episode, objective,
                                    params, layout)
        cache[candidate] = result
        return result.score, result.code

    search = pattern_search(initial, bounds, evaluate, budget,
                            parallel=parallel)
    search.seed = episode.wind.seed
    return search, cache[search.best]


def allocate_power(available, farm_target: float,
                   cap: float = 5.0e6) -> np.ndarray:
    """Split a farm power demand proportionally to availability.

    Shares are proportional to each turbine's window-average available
    power, capped per turbine, with capped excess redistributed among
    the rest; the shares sum to the farm target exactly.
    """
    avail = np.minimum(np.asarray(available, dtype=float), cap)
    if np.any(avail < 0.0):
        raise ValueError("available power must be non-negative")
    supply = float(avail.sum())
    if farm_target > supply + 1e-6:
        raise AllocationError(
            f"farm target {farm_target / 1e6:.3f} MW exceeds available "
            f"{supply / 1e6:.3f} MW (shortfall "
            f"{(farm_target - supply) / 1e6:.3f} MW)")
    shares = farm_target * avail / supply
    # capped turbines hand their excess to the others, repeated until
    # every share respects the cap
    for _ in range(len(shares)):
        over = shares > cap
        free = ~over
        if not np.any(over) or not np.any(free):
            break
        excess = float(np.sum(shares[over] - cap))
        shares[over] = cap
        shares[free] += excess * avail[free] / float(np.sum(avail[free]))
    headroom = np.argmax(cap - shares)
    shares[headroom] += farm_target - float(shares.sum())
    return shares


def write_trace(path, result: SearchResult) -> None:
    """Write the search trace: one record per evaluation, seed in header."""
    with open(path, "w") as fh:
        fh.write("# layout search trace: candidate[m] ... score code "
                 "wall[s]\n")
        fh.write(f"# seed {result.seed}  evaluations {result.evaluations}  "
                 f"final mesh {result.final_mesh:.3f} m\n")
        for rec in result.trace:
            cand = " ".join(f"{y:10.3f}" for y in rec.candidate)
            fh.write(f"{cand} {rec.score:14.6e} {rec.code:16s} "
                     f"{rec.wall_time:9.3f}\n")
