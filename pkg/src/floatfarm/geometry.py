"""Shared planar geometry types and wind-frame conventions.

All positions live in a global frame whose x axis points along the mean
wind direction and whose y axis points 90 degrees counter-clockwise from
it (to port when looking downwind).  Angles at interfaces are degrees;
nacelle yaw is measured counter-clockwise from the x axis, so a positive
yaw turns the rotor normal toward +y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

#: Tolerance on unit-vector norms returned by direction helpers.
UNIT_NORM_TOL = 1e-12

#: Plausibility bound on platform speed, m/s.  Floating platforms drift at
#: well under 1 m/s; anything faster indicates a broken integration.
MAX_PLATFORM_SPEED = 5.0


def vec2(x: float, y: float) -> np.ndarray:
    """Build a finite 2-vector as a float64 array.

    Raises
    ------
    ValueError
        If either component is NaN or infinite.
    """
    v = np.array([x, y], dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"vector components must be finite, got {v!r}")
    return v


def as_vec2(v) -> np.ndarray:
    """Coerce array-likes of length 2 to a validated float64 vector."""
    a = np.asarray(v, dtype=float)
    if a.shape != (2,):
        raise ValueError(f"expected a 2-vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"vector components must be finite, got {a!r}")
    return a


@dataclass
class PlatformState:
    """Planar rigid-body state of one floating platform.

    position : m, global frame
    velocity : m/s, global frame
    """

    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self) -> None:
        self.position = as_vec2(self.position)
        self.velocity = as_vec2(self.velocity)
        speed = float(np.linalg.norm(self.velocity))
        if speed >= MAX_PLATFORM_SPEED:
            raise ValueError(
                f"platform speed {speed:.2f} m/s exceeds plausibility bound "
                f"{MAX_PLATFORM_SPEED} m/s"
            )

    def copy(self) -> "PlatformState":
        return PlatformState(self.position.copy(), self.velocity.copy())


@dataclass(frozen=True)
class InputLimits:
    """Actuator saturation and rate limits for one turbine.

    Defaults are the collective-pitch / generator-torque / nacelle-yaw
    envelope of the reference 5 MW machine.  Pitch is restricted to the
    negative (power-raising toward zero) side because the repositioning
    controllers only ever de-rate from fine pitch.
    """

    beta_min: float = -30.0       # deg
    beta_max: float = 0.0         # deg
    beta_rate: float = 8.0        # deg/s
    torque_min: float = 0.0       # N*m
    torque_max: float = 47402.0   # N*m
    torque_rate: float = 15000.0  # N*m/s
    yaw_min: float = -60.0        # deg
    yaw_max: float = 60.0         # deg
    yaw_rate: float = 0.3         # deg/s
    omega_g_min: float = 669.3 * math.pi / 30.0   # rad/s (669.3 rpm)
    omega_g_max: float = 1173.7 * math.pi / 30.0  # rad/s (1173.7 rpm)


DEFAULT_LIMITS = InputLimits()


@dataclass
class ControlInputs:
    """Actuator commands for one turbine.

    blade_pitch      : collective pitch beta, deg (<= 0 at fine pitch)
    generator_torque : tau_g on the high-speed shaft, N*m
    nacelle_yaw      : gamma, deg CCW from the mean-wind axis
    """

    blade_pitch: float
    generator_torque: float
    nacelle_yaw: float

    def validate(self, limits: InputLimits = DEFAULT_LIMITS) -> None:
        """Raise ValueError if any command lies outside its saturation bounds."""
        if not (limits.beta_min <= self.blade_pitch <= limits.beta_max):
            raise ValueError(
                f"blade pitch {self.blade_pitch:.3f} deg outside "
                f"[{limits.beta_min}, {limits.beta_max}]"
            )
        if not (limits.torque_min <= self.generator_torque <= limits.torque_max):
            raise ValueError(
                f"generator torque {self.generator_torque:.1f} N*m outside "
                f"[{limits.torque_min}, {limits.torque_max}]"
            )
        if not (limits.yaw_min <= self.nacelle_yaw <= limits.yaw_max):
            raise ValueError(
                f"nacelle yaw {self.nacelle_yaw:.3f} deg outside "
                f"[{limits.yaw_min}, {limits.yaw_max}]"
            )

    def clipped(self, limits: InputLimits = DEFAULT_LIMITS) -> "ControlInputs":
        """Return a copy with every command saturated into its bounds."""
        return ControlInputs(
            blade_pitch=float(np.clip(self.blade_pitch, limits.beta_min, limits.beta_max)),
            generator_torque=float(
                np.clip(self.generator_torque, limits.torque_min, limits.torque_max)
            ),
            nacelle_yaw=float(np.clip(self.nacelle_yaw, limits.yaw_min, limits.yaw_max)),
        )

    def rate_limited(
        self, previous: "ControlInputs", dt: float, limits: InputLimits = DEFAULT_LIMITS
    ) -> "ControlInputs":
        """Return a copy whose step from ``previous`` obeys the rate limits."""

        def limit(value: float, prev: float, rate: float) -> float:
            lo, hi = prev - rate * dt, prev + rate * dt
            return float(np.clip(value, lo, hi))

        return ControlInputs(
            blade_pitch=limit(self.blade_pitch, previous.blade_pitch, limits.beta_rate),
            generator_torque=limit(
                self.generator_torque, previous.generator_torque, limits.torque_rate
            ),
            nacelle_yaw=limit(self.nacelle_yaw, previous.nacelle_yaw, limits.yaw_rate),
        )

    def copy(self) -> "ControlInputs":
        return replace(self)


@dataclass(frozen=True)
class TurbineGeometry:
    """Static geometry of one turbine."""

    index: int
    rotor_diameter: float = 126.0  # m
    hub_height: float = 90.0       # m

    def __post_init__(self) -> None:
        if self.rotor_diameter <= 0.0 or self.hub_height <= 0.0:
            raise ValueError("rotor diameter and hub height must be positive")
        if self.index < 0:
            raise ValueError("turbine index must be non-negative")

    @property
    def rotor_radius(self) -> float:
        return 0.5 * self.rotor_diameter

    @property
    def rotor_area(self) -> float:
        return math.pi * self.rotor_radius**2


@dataclass
class FarmLayout:
    """Ordered collection of turbine geometries with neutral positions.

    ``neutral_positions`` are the mooring-neutral anchoring points; the
    instantaneous platform positions live in the simulator state.  Order
    is significant: index i of every per-turbine array refers to
    ``turbines[i]``.
    """

    turbines: list[TurbineGeometry]
    neutral_positions: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if not self.turbines:
            raise ValueError("layout needs at least one turbine")
        indices = [t.index for t in self.turbines]
        if indices != list(range(len(self.turbines))):
            raise ValueError(f"turbine indices must be 0..n-1 in order, got {indices}")
        if self.neutral_positions is None:
            # default: a single row spaced 7 D apart along the wind
            spacing = 7.0 * self.turbines[0].rotor_diameter
            self.neutral_positions = np.array(
                [[i * spacing, 0.0] for i in range(len(self.turbines))]
            )
        self.neutral_positions = np.atleast_2d(
            np.asarray(self.neutral_positions, dtype=float)
        )
        if self.neutral_positions.shape != (len(self.turbines), 2):
            raise ValueError(
                f"neutral_positions shape {self.neutral_positions.shape} does not "
                f"match {len(self.turbines)} turbines"
            )

    def __len__(self) -> int:
        return len(self.turbines)


def relative_wind(effective_wind, platform_velocity) -> np.ndarray:
    """Wind seen by the moving rotor: effective wind minus platform velocity.

    Both arguments are global-frame 2-vectors in m/s.
    """
    return as_vec2(effective_wind) - as_vec2(platform_velocity)


def rotor_normal(yaw_deg: float) -> np.ndarray:
    """Unit normal of the rotor disc for a nacelle yaw in degrees.

    At zero yaw the normal points along +x (downwind); positive yaw
    rotates it counter-clockwise.  The returned norm is exact to 1e-12.
    """
    g = math.radians(yaw_deg)
    n = np.array([math.cos(g), math.sin(g)])
    # cos/sin of the same argument are unit-norm to machine precision
    assert abs(float(n @ n) - 1.0) < UNIT_NORM_TOL
    return n


def projected_speed(rel_wind, yaw_deg: float) -> float:
    """Speed component of the relative wind along the rotor normal.

    Equals ``|v| * cos(gamma - theta)`` where ``theta`` is the wind
    heading in degrees.  Never exceeds the wind speed itself; negative
    values mean the rotor faces away from the wind.
    """
    v = as_vec2(rel_wind)
    return float(v @ rotor_normal(yaw_deg))
