"""Turbulent free-stream wind synthesis and lookup.

A single horizontal wind vector drives the whole farm (no spatial
variation of the free stream; spatial structure comes from the wakes).
Longitudinal turbulence is synthesized from the von Karman spectrum

    S(f) = 4 sigma^2 (L/U) / (1 + 70.8 (f L / U)^2)^(5/6)

by inverse FFT with random phases, which makes a series reproducible
from its integer seed alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from floatfarm.geometry import as_vec2


@dataclass(frozen=True)
class WindSpec:
    """Recipe for one synthetic wind series.

    mean_velocity        : global-frame mean wind vector, m/s
    turbulence_intensity : sigma / |mean|, dimensionless (0 disables)
    length_scale         : integral length scale L, m
    duration             : series length, s
    sample_dt            : sample spacing, s
    seed                 : RNG seed; equal seeds give identical series
    """

    mean_velocity: tuple[float, float]
    turbulence_intensity: float = 0.06
    length_scale: float = 340.0
    duration: float = 3600.0
    sample_dt: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        as_vec2(self.mean_velocity)
        if self.turbulence_intensity < 0.0:
            raise ValueError("turbulence intensity must be >= 0")
        if self.length_scale <= 0.0:
            raise ValueError("length scale must be positive")
        if self.duration <= 0.0 or self.sample_dt <= 0.0:
            raise ValueError("duration and sample_dt must be positive")
        if self.duration < self.sample_dt:
            raise ValueError("duration shorter than one sample interval")


class WindSample(NamedTuple):
    velocity: np.ndarray      # m/s
    acceleration: np.ndarray  # m/s^2


@dataclass
class WindSeries:
    """Sampled wind vector series with stored time derivatives.

    velocities[k] is the wind at t = k * dt.  accelerations holds the
    centered finite difference of the samples (one-sided at the ends),
    the best derivative estimate available at the nodes themselves.
    """

    dt: float
    velocities: np.ndarray      # (n, 2)
    accelerations: np.ndarray   # (n, 2)

    def __post_init__(self) -> None:
        self.velocities = np.atleast_2d(np.asarray(self.velocities, dtype=float))
        self.accelerations = np.atleast_2d(np.asarray(self.accelerations, dtype=float))
        if self.velocities.shape != self.accelerations.shape:
            raise ValueError("velocity and acceleration arrays must match")
        if self.velocities.shape[1] != 2 or len(self.velocities) < 2:
            raise ValueError("series needs at least two 2-vector samples")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")

    @property
    def duration(self) -> float:
        return (len(self.velocities) - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.velocities)) * self.dt


def von_karman_psd(f: np.ndarray, sigma: float, length_scale: float, mean_speed: float) -> np.ndarray:
    """One-sided von Karman longitudinal spectrum, (m/s)^2 per Hz."""
    f = np.asarray(f, dtype=float)
    fl = f * length_scale / mean_speed
    return 4.0 * sigma**2 * (length_scale / mean_speed) / (1.0 + 70.8 * fl**2) ** (5.0 / 6.0)


def _finite_difference(values: np.ndarray, dt: float) -> np.ndarray:
    """Centered first derivative with one-sided ends, along axis 0."""
    out = np.empty_like(values)
    out[1:-1] = (values[2:] - values[:-2]) / (2.0 * dt)
    out[0] = (values[1] - values[0]) / dt
    out[-1] = (values[-1] - values[-2]) / dt
    return out


def synthesize(spec: WindSpec) -> WindSeries:
    """Generate a wind series realizing ``spec``.

    The fluctuation acts along the mean-wind direction.  Sample mean
    converges to the specified mean and sample standard deviation to
    TI * |mean| as the duration grows (exact for TI = 0).
    """
    mean = as_vec2(spec.mean_velocity)
    mean_speed = float(np.linalg.norm(mean))
    n = int(round(spec.duration / spec.sample_dt)) + 1
    if spec.turbulence_intensity == 0.0 or mean_speed == 0.0:
        velocities = np.tile(mean, (n, 1))
        return WindSeries(spec.sample_dt, velocities, np.zeros_like(velocities))

    sigma = spec.turbulence_intensity * mean_speed
    # FFT length: even, covering the full series
    m = n if n % 2 == 0 else n + 1
    freqs = np.fft.rfftfreq(m, spec.sample_dt)
    df = freqs[1]
    amps = np.sqrt(2.0 * von_karman_psd(freqs[1:], sigma, spec.length_scale, mean_speed) * df)

    rng = np.random.default_rng(spec.seed)
    phases = rng.uniform(0.0, 2.0 * np.pi, len(amps))
    spectrum = np.zeros(len(freqs), dtype=complex)
    spectrum[1:] = 0.5 * m * amps * np.exp(1j * phases)
    # Nyquist bin of an even-length rfft must be real to keep irfft exact
    spectrum[-1] = spectrum[-1].real
    fluctuation = np.fft.irfft(spectrum, n=m)[:n]

    direction = mean / mean_speed
    velocities = mean + np.outer(fluctuation, direction)
    return WindSeries(spec.sample_dt, velocities, _finite_difference(velocities, spec.sample_dt))


def sample(series: WindSeries, t: float) -> WindSample:
    """Wind vector and acceleration at time ``t``.

    Between nodes the velocity is interpolated linearly and the
    acceleration is the slope of that interpolant; at a node the stored
    sample (with its centered-difference acceleration) is returned.

    Raises
    ------
    ValueError
        If ``t`` lies outside the series.
    """
    if t < -1e-9 or t > series.duration + 1e-9:
        raise ValueError(f"t = {t:.3f} s outside series [0, {series.duration:.3f}] s")
    x = t / series.dt
    k = int(np.clip(np.floor(x), 0, len(series.velocities) - 2))
    frac = x - k
    if abs(frac) < 1e-9:
        return WindSample(series.velocities[k].copy(), series.accelerations[k].copy())
    if abs(frac - 1.0) < 1e-9:
        return WindSample(series.velocities[k + 1].copy(), series.accelerations[k + 1].copy())
    v0, v1 = series.velocities[k], series.velocities[k + 1]
    slope = (v1 - v0) / series.dt
    return WindSample(v0 + frac * (v1 - v0), slope)


def export_series(series: WindSeries, path) -> None:
    """Write the series as a three-column text file (t, Ux, Uy)."""
    with open(path, "w") as fh:
        fh.write("# wind series: t[s] Ux[m/s] Uy[m/s]\n")
        fh.write(f"# dt {series.dt:.6f} samples {len(series.velocities)}\n")
        for k, (vx, vy) in enumerate(series.velocities):
            fh.write(f"{k * series.dt:.4f} {vx:.8f} {vy:.8f}\n")
