"""Dynamic simulation of floating wind farms repositioned through thrust.

The package couples a planar platform/drivetrain plant, a dynamic wake
transport model, catenary mooring restoring forces, and a two-tier
controller stack: a farm-level pattern search that picks lateral target
positions, and per-turbine model predictive controllers that steer each
platform to its target by modulating blade pitch and nacelle yaw.
"""

from floatfarm.geometry import (
    ControlInputs,
    FarmLayout,
    InputLimits,
    PlatformState,
    TurbineGeometry,
    projected_speed,
    relative_wind,
    rotor_normal,
    vec2,
)

__version__ = "0.1.0"

__all__ = [
    "ControlInputs",
    "FarmLayout",
    "InputLimits",
    "PlatformState",
    "TurbineGeometry",
    "projected_speed",
    "relative_wind",
    "rotor_normal",
    "vec2",
    "__version__",
]
