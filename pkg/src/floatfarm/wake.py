"""Dynamic wake transport and multi-wake superposition.

Each turbine owns a 1-D grid along its downstream axis carrying three
characteristic fields: the wake centerline velocity (stored as the
streamwise deficit relative to the free stream plus the lateral
velocity component), the centerline lateral offset, and the wake
diameter.  All three advect downstream at the relative free-stream
speed and pick up local sources:

    deficit, lateral :  relax toward zero at rate 2 k_t / D_w
    offset           :  grows with the lateral velocity
    diameter         :  grows at the constant expansion rate k_t

Storing the deficit rather than the raw wake velocity makes the
free-stream-acceleration and platform-acceleration source terms cancel
identically (the deficit is measured against the co-accelerating
reference), so gusts transport cleanly without numerical churn.

Downstream coordinates x and l offsets translate with the owner
platform; a query for another rotor's inflow projects the relative
position onto the wind axis.  Superposition combines the rotor-averaged
deficits of all upstream wakes by root-sum-square against the
free-stream speed (effective kinetic energy deficit).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from floatfarm.geometry import TurbineGeometry, as_vec2

#: Default temporal wake expansion rate, m/s.
DEFAULT_EXPANSION_RATE = 0.16

#: Grid spacing as a fraction of rotor diameter.
GRID_SPACING_FRACTION = 0.25

#: Downstream domain length in rotor diameters.  Must cover the largest
#: rotor-to-rotor separation in the farm (14 D for the reference row).
DEFAULT_EXTENT_DIAMETERS = 15.0

#: Gaussian width as a fraction of wake diameter (wake edge near 2 sigma).
SIGMA_FRACTION = 0.25

#: Nodes/weights for rotor-disc averaging across the diameter.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(7)


@dataclass
class WakeGrid:
    """Wake state shed by one turbine on a uniform downstream grid.

    vw[:, 0] is the streamwise velocity deficit (>= 0, m/s) against the
    free stream; vw[:, 1] is the lateral wake velocity.  yw is the
    centerline lateral offset relative to the owner platform; dw is the
    wake diameter.  owner_position / owner_velocity snapshot the
    platform state at the last boundary refresh so the grid can be
    queried in global coordinates on its own.
    """

    owner: int
    x_nodes: np.ndarray
    vw: np.ndarray
    yw: np.ndarray
    dw: np.ndarray
    expansion_rate: float
    rotor_diameter: float
    owner_position: np.ndarray
    owner_velocity: np.ndarray

    def __post_init__(self) -> None:
        self.x_nodes = np.asarray(self.x_nodes, dtype=float)
        self.vw = np.asarray(self.vw, dtype=float)
        self.yw = np.asarray(self.yw, dtype=float)
        self.dw = np.asarray(self.dw, dtype=float)
        self.owner_position = as_vec2(self.owner_position)
        self.owner_velocity = as_vec2(self.owner_velocity)
        n = len(self.x_nodes)
        if self.vw.shape != (n, 2) or self.yw.shape != (n,) or self.dw.shape != (n,):
            raise ValueError("field arrays must match the node count")
        steps = np.diff(self.x_nodes)
        if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * steps[0]:
            raise ValueError("x_nodes must be uniform and strictly increasing")
        if np.any(self.dw < self.rotor_diameter - 1e-9):
            raise ValueError("wake diameter below rotor diameter")

    @property
    def spacing(self) -> float:
        return float(self.x_nodes[1] - self.x_nodes[0])

    @property
    def extent(self) -> float:
        return float(self.x_nodes[-1])

    def copy(self) -> "WakeGrid":
        return replace(self, x_nodes=self.x_nodes.copy(), vw=self.vw.copy(),
                       yw=self.yw.copy(), dw=self.dw.copy(),
                       owner_position=self.owner_position.copy(),
                       owner_velocity=self.owner_velocity.copy())


@dataclass
class WakeFieldSnapshot:
    """All wake grids at one instant."""

    grids: list[WakeGrid]
    timestamp: float = 0.0


def deflection_velocity(ct: float, speed: float, yaw_deg: float, induction: float) -> float:
    """Lateral wake velocity at the rotor plane from yaw misalignment.

    Skew-momentum form -(1/2) C_t |V| cos^2(g) sin(g) / (1 + a): the
    rotor thrusts the air opposite its own lateral push, so the sign is
    opposite the yaw angle.
    """
    g = math.radians(yaw_deg)
    return -0.5 * ct * speed * math.cos(g) ** 2 * math.sin(g) / (1.0 + induction)


def _boundary_condition(inflow: np.ndarray, induction: float, yaw_deg: float
                        ) -> tuple[float, float]:
    """Node-0 (deficit, lateral velocity) for the rotor-plane condition."""
    speed = float(np.linalg.norm(inflow))
    deficit = 2.0 * induction * speed
    ct = 4.0 * induction * (1.0 - induction)
    lateral = float(inflow[1]) + deflection_velocity(ct, speed, yaw_deg, induction)
    return deficit, lateral


def init_wake(turbine: TurbineGeometry, inflow, induction: float, yaw_deg: float,
              expansion_rate: float = DEFAULT_EXPANSION_RATE,
              extent_diameters: float = DEFAULT_EXTENT_DIAMETERS,
              owner_position=(0.0, 0.0), owner_velocity=(0.0, 0.0)) -> WakeGrid:
    """Build a wake grid in the steady advected state for fixed inflow.

    ``inflow`` is the rotor's local relative wind; the node-0 deficit is
    the actuator-disc extraction 2 a |inflow| and decays downstream as
    (D / D_w)^2 per the steady balance of the transport equations.

    Raises
    ------
    ValueError
        If induction is outside [0, 0.5) (momentum theory breakdown).
    """
    if not (0.0 <= induction < 0.5):
        raise ValueError(
            f"induction {induction} outside [0, 0.5): momentum theory breakdown")
    inflow = as_vec2(inflow)
    d = turbine.rotor_diameter
    dx = GRID_SPACING_FRACTION * d
    n = int(round(extent_diameters * d / dx)) + 1
    x = np.arange(n) * dx

    deficit0, lateral0 = _boundary_condition(inflow, induction, yaw_deg)
    speed = float(np.linalg.norm(inflow))
    if speed > 1e-6:
        growth = expansion_rate / speed           # diameter slope dD_w/dx
        dw = d + growth * x
        decay = (d / dw) ** 2                     # steady deficit attenuation
        yw = np.zeros(n)
        if abs(lateral0) > 0.0:
            yw = (lateral0 / speed) * d * x / dw  # integral of lateral/adv speed
    else:
        dw = np.full(n, d)
        decay = np.zeros(n)
        decay[0] = 1.0
        yw = np.zeros(n)

    vw = np.column_stack([deficit0 * decay, lateral0 * decay])
    return WakeGrid(owner=turbine.index, x_nodes=x, vw=vw, yw=yw, dw=dw,
                    expansion_rate=expansion_rate, rotor_diameter=d,
                    owner_position=as_vec2(owner_position),
                    owner_velocity=as_vec2(owner_velocity))


def set_boundary(grid: WakeGrid, inflow, induction: float, yaw_deg: float,
                 owner_position, owner_velocity) -> None:
    """Refresh the rotor-plane condition at node 0 in place.

    Called once per simulation step after the plant update so the newly
    shed wake carries the current thrust state.
    """
    if not (0.0 <= induction < 0.5):
        raise ValueError(
            f"induction {induction} outside [0, 0.5): momentum theory breakdown")
    deficit0, lateral0 = _boundary_condition(as_vec2(inflow), induction, yaw_deg)
    grid.vw[0, 0] = deficit0
    grid.vw[0, 1] = lateral0
    grid.yw[0] = 0.0
    grid.dw[0] = grid.rotor_diameter
    grid.owner_position = as_vec2(owner_position)
    grid.owner_velocity = as_vec2(owner_velocity)


def step_wake(grid: WakeGrid, free_stream_speed: float, free_stream_accel,
              platform_vel, platform_accel, dt: float) -> WakeGrid:
    """Advance all wake fields one explicit upwind step.

    The advection speed is the free stream relative to the owner's
    streamwise drift.  In deficit coordinates the free-stream and
    platform acceleration sources cancel exactly (both shift the
    reference the deficit is measured against), so those arguments do
    not alter the stored state; they are accepted to keep the stepping
    interface explicit about its physical inputs.  The node-0 boundary
    is held at its last rotor-plane condition.

    Raises
    ------
    ValueError
        If the CFL condition (U - v_x) dt <= spacing is violated, or the
        advection speed is negative.
    """
    as_vec2(free_stream_accel)
    platform_vel = as_vec2(platform_vel)
    as_vec2(platform_accel)
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    speed = free_stream_speed - float(platform_vel[0])
    if speed < 0.0:
        raise ValueError("platform outruns the free stream; advection reversed")
    dx = grid.spacing
    if speed * dt > dx + 1e-12:
        raise ValueError(
            f"CFL violated: advection {speed:.2f} m/s at dt={dt} s needs "
            f"dt <= {dx / speed:.3f} s on spacing {dx:.2f} m")

    nu = speed * dt / dx
    out = grid.copy()

    def advect(values: np.ndarray) -> np.ndarray:
        upwind = np.empty_like(values)
        upwind[1:] = values[1:] - nu * (values[1:] - values[:-1])
        upwind[0] = values[0]
        return upwind

    relax = 2.0 * grid.expansion_rate / grid.dw * dt
    out.vw = advect(grid.vw) - relax[:, None] * grid.vw
    out.yw = advect(grid.yw) + dt * (grid.vw[:, 1] - float(platform_vel[1]))
    out.dw = advect(grid.dw) + dt * grid.expansion_rate

    # rotor-plane boundary persists until the next set_boundary call
    out.vw[0] = grid.vw[0]
    out.yw[0] = 0.0
    out.dw[0] = grid.rotor_diameter
    return out


def _interp_fields(grid: WakeGrid, x_hat: float) -> tuple[float, float, float, float]:
    """(deficit, lateral, offset, diameter) at downstream coordinate x_hat."""
    if not (0.0 <= x_hat <= grid.extent + 1e-9):
        raise ValueError(f"x = {x_hat:.1f} m outside wake domain [0, {grid.extent:.1f}]")
    deficit = float(np.interp(x_hat, grid.x_nodes, grid.vw[:, 0]))
    lateral = float(np.interp(x_hat, grid.x_nodes, grid.vw[:, 1]))
    offset = float(np.interp(x_hat, grid.x_nodes, grid.yw))
    diameter = float(np.interp(x_hat, grid.x_nodes, grid.dw))
    return deficit, lateral, offset, diameter


def wake_tube(grid: WakeGrid, x_hat: float) -> tuple[float, float]:
    """Global centerline y and tube diameter at downstream coordinate x_hat."""
    _, _, offset, diameter = _interp_fields(grid, x_hat)
    return float(grid.owner_position[1]) + offset, diameter


def gaussian_deficit(grid: WakeGrid, x_hat: float, y_global: float) -> float:
    """Streamwise deficit at a point, Gaussian in distance from centerline."""
    deficit, _, offset, diameter = _interp_fields(grid, x_hat)
    sigma = SIGMA_FRACTION * diameter
    r = y_global - (float(grid.owner_position[1]) + offset)
    return deficit * math.exp(-0.5 * (r / sigma) ** 2)


def gaussian_velocity(grid: WakeGrid, x_hat: float, y_global: float,
                      free_stream) -> np.ndarray:
    """Wake velocity vector at a point: free stream minus radial deficit."""
    free_stream = as_vec2(free_stream)
    speed = float(np.linalg.norm(free_stream))
    if speed == 0.0:
        return free_stream.copy()
    n_inf = free_stream / speed
    return free_stream - gaussian_deficit(grid, x_hat, y_global) * n_inf


def rotor_averaged_deficit(grid: WakeGrid, target: TurbineGeometry,
                           target_position) -> float:
    """Wake deficit averaged across the target rotor's disc diameter.

    Gauss-Legendre quadrature over lateral stations of the disc; never
    exceeds the centerline deficit at the same downstream distance.
    """
    pos = as_vec2(target_position)
    x_hat = float(pos[0] - grid.owner_position[0])
    radius = target.rotor_radius
    stations = pos[1] + radius * _GL_NODES
    values = [gaussian_deficit(grid, x_hat, y) for y in stations]
    return float(np.dot(_GL_WEIGHTS, values) / np.sum(_GL_WEIGHTS))


def upstream_set(target: int, positions: list, n_inf: np.ndarray) -> list[int]:
    """Indices upstream of ``target`` along the wind axis, ties by index."""
    x = [float(as_vec2(p.position if hasattr(p, "position") else p) @ n_inf)
         for p in positions]
    out = []
    for q in range(len(positions)):
        if q == target:
            continue
        if x[q] < x[target] or (x[q] == x[target] and q < target):
            out.append(q)
    return out


def effective_velocity(snapshot: WakeFieldSnapshot, target: int,
                       positions: list, free_stream,
                       geometries: list[TurbineGeometry] | None = None) -> np.ndarray:
    """Rotor-incident velocity for one turbine under all upstream wakes.

    Root-sum-square of the rotor-averaged per-wake deficits, subtracted
    from the free-stream speed along its direction; clamped so the
    result lies between zero and the free stream.
    """
    free_stream = as_vec2(free_stream)
    speed = float(np.linalg.norm(free_stream))
    if speed == 0.0:
        return free_stream.copy()
    n_inf = free_stream / speed

    pos_t = as_vec2(positions[target].position
                    if hasattr(positions[target], "position") else positions[target])
    geom = (geometries[target] if geometries is not None
            else TurbineGeometry(target, rotor_diameter=snapshot.grids[target].rotor_diameter))

    total_sq = 0.0
    for q in upstream_set(target, positions, n_inf):
        grid = snapshot.grids[q]
        x_hat = float((pos_t - grid.owner_position) @ n_inf)
        if x_hat <= 0.0 or x_hat > grid.extent:
            continue
        deficit = rotor_averaged_deficit(grid, geom, pos_t)
        total_sq += min(deficit, speed) ** 2
    reduced = max(speed - math.sqrt(total_sq), 0.0)
    return reduced * n_inf


@dataclass(frozen=True)
class FieldGridSpec:
    """Bounding box and resolution for a sampled velocity field."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int
    ny: int

    def __post_init__(self) -> None:
        if self.nx < 2 or self.ny < 2:
            raise ValueError("resolution must be at least 2x2")
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise ValueError("degenerate bounding box")


def sample_field(snapshot: WakeFieldSnapshot, positions: list, free_stream,
                 grid_spec: FieldGridSpec) -> np.ndarray:
    """Superposed wind speed on a regular grid, shape (ny, nx).

    Applies the same root-sum-square deficit combination as the rotor
    query, but pointwise rather than rotor-averaged.
    """
    free_stream = as_vec2(free_stream)
    speed = float(np.linalg.norm(free_stream))
    xs = np.linspace(grid_spec.x_min, grid_spec.x_max, grid_spec.nx)
    ys = np.linspace(grid_spec.y_min, grid_spec.y_max, grid_spec.ny)
    out = np.full((grid_spec.ny, grid_spec.nx), speed)
    if speed == 0.0:
        return out
    n_inf = free_stream / speed
    for iy, y in enumerate(ys):
        for ix, x in enumerate(xs):
            total_sq = 0.0
            for grid in snapshot.grids:
                x_hat = float((np.array([x, y]) - grid.owner_position) @ n_inf)
                if x_hat <= 0.0 or x_hat > grid.extent:
                    continue
                deficit = gaussian_deficit(grid, x_hat, y)
                total_sq += min(deficit, speed) ** 2
            out[iy, ix] = max(speed - math.sqrt(total_sq), 0.0)
    return out


def write_field_grid(path, field: np.ndarray, spec: FieldGridSpec) -> None:
    """Serialize a sampled field: header with shape and bounds, then rows."""
    with open(path, "w") as fh:
        fh.write("# wake velocity field, speeds in m/s, row-major over y rows\n")
        fh.write(f"{spec.nx} {spec.ny} {spec.x_min:.3f} {spec.x_max:.3f} "
                 f"{spec.y_min:.3f} {spec.y_max:.3f}\n")
        for row in field:
            fh.write(" ".join(f"{v:.6f}" for v in row) + "\n")


def read_field_grid(path) -> tuple[np.ndarray, FieldGridSpec]:
    """Parse a field file written by write_field_grid."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    head = lines[0].split()
    nx, ny = int(head[0]), int(head[1])
    spec = FieldGridSpec(float(head[2]), float(head[3]), float(head[4]),
                         float(head[5]), nx, ny)
    field = np.array([[float(v) for v in ln.split()] for ln in lines[1:]])
    if field.shape != (ny, nx):
        raise ValueError(f"field shape {field.shape} does not match header")
    return field, spec
