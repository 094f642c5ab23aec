"""Rotor aerodynamics: coefficient tables, thrust, torque, power.

Thrust follows the actuator-disc form

    F_a = (1/8) C_t pi rho D^2 |V_rel|^2 n(gamma)

applied along the rotor normal, so yaw changes the force direction but
not its magnitude.  C_t and the torque coefficient C_q are read from a
bilinear table over (tip-speed ratio, blade pitch) that ships with the
package; an analytic surrogate (also exported here) regenerates it.
"""

from __future__ import annotations

import importlib.resources
import math
from dataclasses import dataclass, field

import numpy as np

from floatfarm.geometry import as_vec2, rotor_normal

BETZ_LIMIT = 16.0 / 27.0

# Analytic surrogate constants.  Shapes chosen so that the power curve has
# a broad plateau around the design tip-speed ratio, pitching away from
# zero rolls power off fast (stall-side derating), and the torque
# coefficient falls with speed on the operating flank, which keeps the
# drivetrain equilibrium stable under a power-law generator load.
CP_MAX = 0.56
CP_LAMBDA_PEAK = 4.4
CP_WIDTH_LEFT = 2.0
CP_WIDTH_RIGHT = 7.52
CP_BETA_WIDTH = 12.0
CT_SCALE = 1.03
CT_LAMBDA_SCALE = 3.3


def surrogate_cp(tsr, pitch_deg):
    """Power coefficient surrogate C_p(lambda, beta)."""
    tsr = np.asarray(tsr, dtype=float)
    pitch_deg = np.asarray(pitch_deg, dtype=float)
    width = np.where(tsr < CP_LAMBDA_PEAK, CP_WIDTH_LEFT, CP_WIDTH_RIGHT)
    shape = np.exp(-(((tsr - CP_LAMBDA_PEAK) / width) ** 2))
    derate = np.exp(-((pitch_deg / CP_BETA_WIDTH) ** 2))
    return CP_MAX * shape * derate


def surrogate_ct(tsr):
    """Thrust coefficient surrogate C_t(lambda), pitch-independent.

    Monotone saturating shape; within the narrow pitch range the
    controllers use, thrust tracks tip-speed ratio far more strongly
    than pitch, so the table carries no direct pitch dependence.
    """
    tsr = np.asarray(tsr, dtype=float)
    return CT_SCALE * (1.0 - np.exp(-tsr / CT_LAMBDA_SCALE))


def surrogate_cq(tsr, pitch_deg):
    """Torque coefficient C_q = C_p / lambda."""
    return surrogate_cp(tsr, pitch_deg) / np.asarray(tsr, dtype=float)


@dataclass
class CoefficientTable:
    """Bilinear C_t / C_q table over (tip-speed ratio, blade pitch)."""

    tsr_axis: np.ndarray
    pitch_axis: np.ndarray
    ct: np.ndarray  # (n_tsr, n_pitch)
    cq: np.ndarray  # (n_tsr, n_pitch)
    clamp_count: int = 0  # out-of-bounds lookups seen so far

    def __post_init__(self) -> None:
        self.tsr_axis = np.asarray(self.tsr_axis, dtype=float)
        self.pitch_axis = np.asarray(self.pitch_axis, dtype=float)
        self.ct = np.asarray(self.ct, dtype=float)
        self.cq = np.asarray(self.cq, dtype=float)
        want = (len(self.tsr_axis), len(self.pitch_axis))
        if self.ct.shape != want or self.cq.shape != want:
            raise ValueError("coefficient block shapes do not match axes")
        if np.any(np.diff(self.tsr_axis) <= 0) or np.any(np.diff(self.pitch_axis) <= 0):
            raise ValueError("table axes must be strictly increasing")
        if self.ct.min() < 0.0 or self.ct.max() > 1.2:
            raise ValueError("C_t outside [0, 1.2]")
        cp = self.cq * self.tsr_axis[:, None]
        if cp.max() > BETZ_LIMIT:
            raise ValueError(f"table violates the Betz limit: max C_p = {cp.max():.3f}")

    def lookup(self, tsr: float, pitch_deg: float) -> tuple[float, float]:
        """Bilinear (C_t, C_q); out-of-bounds arguments clamp and count."""
        t, p = float(tsr), float(pitch_deg)
        if not (self.tsr_axis[0] <= t <= self.tsr_axis[-1]
                and self.pitch_axis[0] <= p <= self.pitch_axis[-1]):
            self.clamp_count += 1
            t = min(max(t, self.tsr_axis[0]), self.tsr_axis[-1])
            p = min(max(p, self.pitch_axis[0]), self.pitch_axis[-1])
        i = min(int(np.searchsorted(self.tsr_axis, t, side="right")) - 1,
                len(self.tsr_axis) - 2)
        j = min(int(np.searchsorted(self.pitch_axis, p, side="right")) - 1,
                len(self.pitch_axis) - 2)
        i = max(i, 0)
        j = max(j, 0)
        wt = (t - self.tsr_axis[i]) / (self.tsr_axis[i + 1] - self.tsr_axis[i])
        wp = (p - self.pitch_axis[j]) / (self.pitch_axis[j + 1] - self.pitch_axis[j])

        def blend(z: np.ndarray) -> float:
            return float((1 - wt) * (1 - wp) * z[i, j] + wt * (1 - wp) * z[i + 1, j]
                         + (1 - wt) * wp * z[i, j + 1] + wt * wp * z[i + 1, j + 1])

        return blend(self.ct), blend(self.cq)


def write_coefficient_table(table: CoefficientTable, path) -> None:
    """Serialize a table: header counts, axis vectors, C_t block, C_q block."""
    with open(path, "w") as fh:
        fh.write("# rotor coefficient table: C_t and C_q over (lambda, beta)\n")
        fh.write("# layout: counts line, lambda axis, beta axis, "
                 "row-major C_t block, row-major C_q block\n")
        fh.write(f"{len(table.tsr_axis)} {len(table.pitch_axis)}\n")
        for axis in (table.tsr_axis, table.pitch_axis):
            fh.write(" ".join(f"{v:.6f}" for v in axis) + "\n")
        for block in (table.ct, table.cq):
            for row in block:
                fh.write(" ".join(f"{v:.8f}" for v in row) + "\n")


def read_coefficient_table(path) -> CoefficientTable:
    """Parse the plain-text table format written by write_coefficient_table."""
    with open(path) as fh:
        tokens: list[str] = []
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                tokens.extend(line.split())
    n_tsr, n_pitch = int(tokens[0]), int(tokens[1])
    vals = np.array(tokens[2:], dtype=float)
    want = n_tsr + n_pitch + 2 * n_tsr * n_pitch
    if len(vals) != want:
        raise ValueError(f"coefficient table has {len(vals)} values, expected {want}")
    tsr_axis = vals[:n_tsr]
    pitch_axis = vals[n_tsr:n_tsr + n_pitch]
    blocks = vals[n_tsr + n_pitch:].reshape(2, n_tsr, n_pitch)
    return CoefficientTable(tsr_axis, pitch_axis, blocks[0], blocks[1])


def build_default_table() -> CoefficientTable:
    """Evaluate the analytic surrogate on the standard grid."""
    tsr_axis = np.round(np.arange(1.0, 15.0 + 1e-9, 0.2), 6)
    pitch_axis = np.round(np.arange(-30.0, 0.0 + 1e-9, 1.0), 6)
    tt, pp = np.meshgrid(tsr_axis, pitch_axis, indexing="ij")
    ct = np.broadcast_to(surrogate_ct(tsr_axis)[:, None], tt.shape).copy()
    cq = surrogate_cq(tt, pp)
    return CoefficientTable(tsr_axis, pitch_axis, ct, cq)


def default_table_path():
    return importlib.resources.files("floatfarm") / "data" / "rotor_coeffs.dat"


@dataclass
class AeroParams:
    """Rotor aerodynamic parameters for one turbine."""

    rotor_diameter: float = 126.0  # m
    air_density: float = 1.225     # kg/m^3
    coefficient_table: CoefficientTable = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.rotor_diameter <= 0.0 or self.air_density <= 0.0:
            raise ValueError("rotor diameter and air density must be positive")
        if self.coefficient_table is None:
            self.coefficient_table = read_coefficient_table(default_table_path())
        axes_ok = (self.coefficient_table.pitch_axis[0] <= -30.0
                   and self.coefficient_table.pitch_axis[-1] >= 0.0
                   and self.coefficient_table.tsr_axis[0] <= 1.0
                   and self.coefficient_table.tsr_axis[-1] >= 15.0)
        if not axes_ok:
            raise ValueError("table must cover beta in [-30, 0] deg, lambda in [1, 15]")

    @property
    def rotor_area(self) -> float:
        return math.pi * (0.5 * self.rotor_diameter) ** 2


def coefficient_lookup(aero: AeroParams, tsr: float, pitch_deg: float) -> tuple[float, float]:
    """Interpolated (C_t, C_q) at one operating point."""
    return aero.coefficient_table.lookup(tsr, pitch_deg)


def thrust_force(aero: AeroParams, v_rel, yaw_deg: float, ct: float) -> np.ndarray:
    """Aerodynamic thrust vector on the platform, N.

    pre: ct >= 0.
    """
    if ct < 0.0:
        raise ValueError("thrust coefficient must be non-negative")
    v = as_vec2(v_rel)
    speed_sq = float(v @ v)
    mag = 0.125 * ct * math.pi * aero.air_density * aero.rotor_diameter**2 * speed_sq
    return mag * rotor_normal(yaw_deg)


def aero_torque(aero: AeroParams, v_rel, cq: float) -> float:
    """Aerodynamic torque on the rotor shaft: (1/2) rho A C_q |V|^2 R, N*m."""
    v = as_vec2(v_rel)
    speed_sq = float(v @ v)
    return 0.5 * aero.air_density * aero.rotor_area * cq * speed_sq * 0.5 * aero.rotor_diameter


def tip_speed_ratio(aero: AeroParams, rotor_speed: float, v_rel) -> float:
    """lambda = omega_r R / |V_rel|; infinite wind -> 0 guard not needed here."""
    speed = float(np.linalg.norm(as_vec2(v_rel)))
    if speed <= 1e-9:
        return float("inf")
    return rotor_speed * 0.5 * aero.rotor_diameter / speed


def power_output(gen_torque: float, gen_speed: float, efficiency: float) -> float:
    """Electrical power P = tau_g * omega_g * eta_g, W.  pre: omega_g >= 0."""
    if gen_speed < 0.0:
        raise ValueError("generator speed must be non-negative")
    return gen_torque * gen_speed * efficiency


@dataclass
class PowerRecord:
    """Per-turbine electrical power and its exact farm total, W."""

    per_turbine: np.ndarray
    farm_total: float = field(init=False)

    def __post_init__(self) -> None:
        self.per_turbine = np.asarray(self.per_turbine, dtype=float)
        self.farm_total = float(np.sum(self.per_turbine))


def farm_power(per_turbine) -> float:
    """Exact sum of per-turbine power values, W."""
    return float(np.sum(np.asarray(per_turbine, dtype=float)))
