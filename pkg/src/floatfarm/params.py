"""Annotated physical-parameter files and the assembled parameter set.

Every physical constant lives in a structured text file of sections and
``key = value`` lines.  Each line carries a provenance tag in its
trailing comment (``catalog`` for published dimensions of the reference
machine, ``default`` for engineering choices made here, ``derived`` for
values computed from others).  The parser keeps those tags so runs can
echo where every number came from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from floatfarm.geometry import InputLimits
from floatfarm.mooring import MooringSystem, default_system
from floatfarm.plant import DrivetrainParams, HydroParams
from floatfarm.rotor import AeroParams

PROVENANCE_TAGS = ("catalog", "default", "derived")


class ParameterError(ValueError):
    """Malformed or inconsistent parameter file."""


def parse_annotated(path) -> tuple[dict[str, dict[str, float]], dict[str, str]]:
    """Read a sectioned key/value file, keeping per-key provenance notes.

    Returns (values, provenance) where provenance maps "section.key" to
    the trailing comment text.  A stock INI parser would discard the
    comments, which are load-bearing here.
    """
    values: dict[str, dict[str, float]] = {}
    provenance: dict[str, str] = {}
    section = None
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            values.setdefault(section, {})
            continue
        if section is None:
            raise ParameterError(f"{path}:{lineno}: key before any [section]")
        if "=" not in line:
            raise ParameterError(f"{path}:{lineno}: expected 'key = value'")
        key_part, _, rest = line.partition("=")
        key = key_part.strip()
        value_part, _, note = rest.partition("#")
        try:
            value = float(value_part.strip())
        except ValueError as exc:
            raise ParameterError(
                f"{path}:{lineno}: non-numeric value {value_part.strip()!r}") from exc
        values[section][key] = value
        provenance[f"{section}.{key}"] = note.strip()
    return values, provenance


@dataclass(frozen=True)
class AxisDof:
    """One uncoupled platform degree of freedom (heave, roll, pitch, yaw)."""

    inertia: float
    added: float
    stiffness: float
    linear_damping: float
    quadratic_drag: float

    def __post_init__(self) -> None:
        if min(self.inertia, self.stiffness) <= 0 or min(
                self.added, self.linear_damping, self.quadratic_drag) < 0:
            raise ValueError("degree-of-freedom constants must be positive")

    @property
    def total_inertia(self) -> float:
        return self.inertia + self.added


@dataclass(frozen=True)
class PlatformDofs:
    """The four platform DOFs outside the planar farm model."""

    heave: AxisDof
    roll: AxisDof
    pitch: AxisDof
    yaw: AxisDof


@dataclass(frozen=True)
class ParameterSet:
    """All physical constants for one turbine/platform unit."""

    aero: AeroParams
    hub_height: float
    hydro: HydroParams
    drivetrain: DrivetrainParams
    gear_ratio: float
    generator_efficiency: float
    mooring: MooringSystem
    limits: InputLimits
    platform: PlatformDofs
    rated_power: float
    provenance: dict[str, str]
    source_path: str

    def provenance_lines(self) -> list[str]:
        """Echo of every constant and its provenance, for run logs."""
        out = []
        for key in sorted(self.provenance):
            out.append(f"{key}: {self.provenance[key]}")
        return out


def _require(values: dict, section: str, keys: list[str], path) -> dict[str, float]:
    if section not in values:
        raise ParameterError(f"{path}: missing section [{section}]")
    missing = [k for k in keys if k not in values[section]]
    if missing:
        raise ParameterError(
            f"{path}: section [{section}] missing keys: {', '.join(missing)}")
    return values[section]


def load_params(path) -> ParameterSet:
    """Assemble a validated ParameterSet from an annotated file."""
    values, provenance = parse_annotated(path)
    for full_key, note in provenance.items():
        tag = note.split(":", 1)[0].strip()
        if tag not in PROVENANCE_TAGS:
            raise ParameterError(
                f"{path}: {full_key} lacks a provenance tag "
                f"(expected one of {PROVENANCE_TAGS})")

    aero = _require(values, "aero",
                    ["rotor_diameter", "hub_height", "air_density"], path)
    hydro = _require(values, "hydro",
                     ["water_density", "drag_sum", "added_mass", "mass",
                      "radiation_damping"], path)
    drive = _require(values, "drivetrain",
                     ["rotor_inertia", "generator_inertia", "shaft_stiffness",
                      "shaft_damping", "gear_ratio", "generator_efficiency"], path)
    moor = _require(values, "mooring",
                    ["water_depth", "line_length", "mass_per_length",
                     "anchor_radius", "fairlead_radius"], path)
    lim = _require(values, "limits",
                   ["blade_pitch_min", "blade_pitch_max", "blade_pitch_rate",
                    "torque_min", "torque_max", "torque_rate",
                    "yaw_min", "yaw_max", "yaw_rate",
                    "generator_speed_min_rpm", "generator_speed_max_rpm"], path)
    rated = _require(values, "rated", ["power"], path)

    dof_keys = ["inertia", "added", "stiffness", "linear_damping", "quadratic_drag"]
    dofs = {}
    for name in ("heave", "roll", "pitch", "yaw"):
        section = _require(values, f"platform_{name}", dof_keys, path)
        dofs[name] = AxisDof(**{k: section[k] for k in dof_keys})

    limits = InputLimits(
        beta_min=lim["blade_pitch_min"],
        beta_max=lim["blade_pitch_max"],
        beta_rate=lim["blade_pitch_rate"],
        torque_min=lim["torque_min"],
        torque_max=lim["torque_max"],
        torque_rate=lim["torque_rate"],
        yaw_min=lim["yaw_min"],
        yaw_max=lim["yaw_max"],
        yaw_rate=lim["yaw_rate"],
        omega_g_min=lim["generator_speed_min_rpm"] * math.pi / 30.0,
        omega_g_max=lim["generator_speed_max_rpm"] * math.pi / 30.0,
    )

    return ParameterSet(
        aero=AeroParams(rotor_diameter=aero["rotor_diameter"],
                        air_density=aero["air_density"]),
        hub_height=aero["hub_height"],
        hydro=HydroParams(water_density=hydro["water_density"],
                          drag_sum=hydro["drag_sum"],
                          added_mass=hydro["added_mass"],
                          mass=hydro["mass"],
                          radiation_damping=hydro["radiation_damping"]),
        drivetrain=DrivetrainParams(rotor_inertia=drive["rotor_inertia"],
                                    generator_inertia=drive["generator_inertia"],
                                    shaft_stiffness=drive["shaft_stiffness"],
                                    shaft_damping=drive["shaft_damping"]),
        gear_ratio=drive["gear_ratio"],
        generator_efficiency=drive["generator_efficiency"],
        mooring=default_system(anchor_radius=moor["anchor_radius"],
                               fairlead_radius=moor["fairlead_radius"],
                               unstretched_length=moor["line_length"],
                               mass_per_length=moor["mass_per_length"],
                               water_depth=moor["water_depth"]),
        limits=limits,
        platform=PlatformDofs(**dofs),
        rated_power=rated["power"],
        provenance=provenance,
        source_path=str(path),
    )


def default_params_path() -> Path:
    """Bundled parameter file for the reference 5 MW semi-submersible."""
    return Path(str(resources.files("floatfarm").joinpath("data/semisub_5mw.params")))


def default_params() -> ParameterSet:
    return load_params(default_params_path())
