"""Quasi-static catenary mooring restoring forces.

Each line is an inextensible chain from a seabed anchor to a platform
fairlead.  Depending on tension, part of the line rests on the seabed
(touchdown regime) or the whole line hangs free.  In both regimes the
horizontal anchor-to-fairlead span is a closed-form, strictly
increasing function of the catenary parameter a = H/w:

    touchdown:   span(a) = L - sqrt(Z (2a + Z)) + a acosh(1 + Z/a)
    fully lifted: span(a) = 2 a asinh(sqrt(L^2 - Z^2) / (2a))

so the tension solve inverts span(a) with a safeguarded Newton
iteration.  Only the horizontal force component enters the planar
platform model; the net force sums -H r_hat over the lines, pulling
each fairlead toward its anchor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from floatfarm.geometry import as_vec2

GRAVITY = 9.81

#: Resolution of the memoized tension lattice, m.
LATTICE_STEP = 0.1

#: Shared span -> catenary-parameter lattices keyed by line geometry.
_LATTICE_CACHE: dict[tuple[float, float, float], tuple[np.ndarray, np.ndarray]] = {}


class LineTautError(ValueError):
    """A mooring line was asked for a span at or beyond its taut limit."""


@dataclass(frozen=True)
class MooringLineSpec:
    """Geometry of a single catenary line.

    anchor          : seabed anchor, global frame, m
    fairlead_offset : fairlead position relative to the platform origin, m
    mass_per_length : submerged weight basis, kg/m (buoyancy already deducted)
    """

    anchor: tuple[float, float]
    fairlead_offset: tuple[float, float]
    unstretched_length: float = 920.0
    mass_per_length: float = 113.35
    water_depth: float = 200.0

    def __post_init__(self) -> None:
        as_vec2(self.anchor)
        as_vec2(self.fairlead_offset)
        if self.unstretched_length <= self.water_depth:
            raise ValueError("line must be longer than the water depth")
        if self.mass_per_length <= 0.0 or self.water_depth <= 0.0:
            raise ValueError("mass_per_length and water_depth must be positive")

    @property
    def weight_per_length(self) -> float:
        """Submerged weight, N/m."""
        return self.mass_per_length * GRAVITY

    @property
    def slack_limit(self) -> float:
        """Span below which the line hangs vertically with zero tension."""
        return self.unstretched_length - self.water_depth

    @property
    def taut_limit(self) -> float:
        """Straight-line span; tension diverges as the span approaches it."""
        return math.sqrt(self.unstretched_length**2 - self.water_depth**2)


@dataclass
class MooringSystem:
    """Set of catenary lines restraining one platform."""

    lines: list[MooringLineSpec] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.lines:
            raise ValueError("mooring system needs at least one line")


def default_system(anchor_radius: float = 837.6, fairlead_radius: float = 40.87,
                   unstretched_length: float = 920.0,
                   mass_per_length: float = 113.35,
                   water_depth: float = 200.0) -> MooringSystem:
    """Three-line system at 120 degree spacing, symmetric about x."""
    lines = []
    for angle_deg in (0.0, 120.0, 240.0):
        c, s = math.cos(math.radians(angle_deg)), math.sin(math.radians(angle_deg))
        lines.append(MooringLineSpec(
            anchor=(anchor_radius * c, anchor_radius * s),
            fairlead_offset=(fairlead_radius * c, fairlead_radius * s),
            unstretched_length=unstretched_length,
            mass_per_length=mass_per_length,
            water_depth=water_depth,
        ))
    return MooringSystem(lines)


def _span_of_parameter(a: float, length: float, depth: float) -> float:
    """Closed-form horizontal span for catenary parameter a = H/w."""
    full_lift_a = (length**2 - depth**2) / (2.0 * depth)
    if a <= full_lift_a:
        suspended = math.sqrt(depth * (2.0 * a + depth))
        return length - suspended + a * math.acosh(1.0 + depth / a)
    chord = math.sqrt(length**2 - depth**2)
    return 2.0 * a * math.asinh(chord / (2.0 * a))


def _span_slope(a: float, length: float, depth: float) -> float:
    """d(span)/da, used by the Newton iteration."""
    full_lift_a = (length**2 - depth**2) / (2.0 * depth)
    if a <= full_lift_a:
        suspended = math.sqrt(depth * (2.0 * a + depth))
        return math.acosh(1.0 + depth / a) - 2.0 * depth / suspended
    v = math.sqrt(length**2 - depth**2) / (2.0 * a)
    return 2.0 * (math.asinh(v) - v / math.sqrt(1.0 + v * v))


def _solve_parameter(span: float, length: float, depth: float,
                     rel_tol: float = 1e-6) -> float:
    """Invert span(a) by Newton iteration safeguarded with bisection."""
    a_lo, a_hi = 1e-6, 10.0 * depth
    while _span_of_parameter(a_hi, length, depth) < span:
        a_hi *= 4.0
        if a_hi > 1e12:
            raise LineTautError(f"span {span:.3f} m not reachable")
    a = 0.5 * (a_lo + a_hi)
    for _ in range(200):
        f = _span_of_parameter(a, length, depth) - span
        if abs(f) <= rel_tol * span:
            return a
        if f > 0.0:
            a_hi = a
        else:
            a_lo = a
        step = f / _span_slope(a, length, depth)
        a_next = a - step
        if not (a_lo < a_next < a_hi):
            a_next = 0.5 * (a_lo + a_hi)
        a = a_next
    return a


def _lattice_for(line: MooringLineSpec) -> tuple[np.ndarray, np.ndarray]:
    key = (line.unstretched_length, line.water_depth, line.mass_per_length)
    cached = _LATTICE_CACHE.get(key)
    if cached is None:
        lo = line.slack_limit + LATTICE_STEP
        hi = line.taut_limit - LATTICE_STEP
        spans = np.arange(lo, hi, LATTICE_STEP)
        params = np.array([
            _solve_parameter(s, line.unstretched_length, line.water_depth)
            for s in spans
        ])
        cached = (spans, params)
        _LATTICE_CACHE[key] = cached
    return cached


def horizontal_tension(line: MooringLineSpec, horizontal_span: float) -> float:
    """Horizontal tension H_F at the given anchor-to-fairlead span, N.

    Returns zero below the slack limit (line piled on the seabed).

    Raises
    ------
    LineTautError
        If the span reaches or exceeds the straight-line taut limit.
    """
    if horizontal_span >= line.taut_limit:
        raise LineTautError(
            f"line taut: span {horizontal_span:.2f} m >= limit {line.taut_limit:.2f} m")
    if horizontal_span <= line.slack_limit:
        return 0.0
    spans, params = _lattice_for(line)
    if spans[0] <= horizontal_span <= spans[-1]:
        a = float(np.interp(horizontal_span, spans, params))
    else:
        a = _solve_parameter(horizontal_span, line.unstretched_length, line.water_depth)
    return a * line.weight_per_length


def net_mooring_force(system: MooringSystem, platform_position) -> np.ndarray:
    """Planar mooring force on the platform at ``platform_position``, N.

    Each line pulls its fairlead toward its anchor with its horizontal
    tension; vertical components are discarded.

    Raises
    ------
    LineTautError
        Re-raised with the offending line's index when any line is taut.
    """
    pos = as_vec2(platform_position)
    force = np.zeros(2)
    for idx, line in enumerate(system.lines):
        fairlead = pos + as_vec2(line.fairlead_offset)
        r = fairlead - as_vec2(line.anchor)
        span = float(np.linalg.norm(r))
        try:
            tension = horizontal_tension(line, span)
        except LineTautError as err:
            raise LineTautError(f"line {idx}: {err}") from None
        if tension > 0.0:
            force -= tension * r / span
    return force


def movable_range(system: MooringSystem, direction, margin: float = 0.0) -> float:
    """Largest displacement along ``direction`` with every line still slack.

    Bisects on the first taut line; ``margin`` shrinks the result to
    keep clear of the tension blow-up near the limit.
    """
    d = as_vec2(direction)
    norm = float(np.linalg.norm(d))
    if norm == 0.0:
        raise ValueError("direction must be nonzero")
    d = d / norm

    def feasible(t: float) -> bool:
        pos = t * d
        for line in system.lines:
            r = pos + as_vec2(line.fairlead_offset) - as_vec2(line.anchor)
            if float(np.linalg.norm(r)) >= line.taut_limit:
                return False
        return True

    lo, hi = 0.0, 1.0
    while feasible(hi):
        hi *= 2.0
        if hi > 1e6:
            return hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return max(lo - margin, 0.0)
