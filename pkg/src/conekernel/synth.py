"""Synthetic spatiotemporal surrogate fields on a weighted grid.

Fields are sums of components, each a fixed spatial pattern times a temporal
law, plus optional white noise:

* periodic: cos(2 pi f t + phase)
* rednoise: order-1 autoregression y_k = a y_{k-1} + sqrt(1 - a^2) n_k with
  a = exp(-dt / tau), stationary unit variance
* modulated: periodic carrier times a rednoise envelope

All randomness comes from a counter-based SplitMix64 generator mapped through
Box-Muller, so identical specs produce bitwise identical fields and the stream
can be reproduced in any language from the constants below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_SPLITMIX_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SPLITMIX_M1 = np.uint64(0xBF58476D1CE4E5B9)
_SPLITMIX_M2 = np.uint64(0x94D049BB133111EB)
_TWO64 = float(2**64)


def _splitmix64(counters: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer over an array of uint64 counters."""
    z = counters * _SPLITMIX_GAMMA
    z = (z ^ (z >> np.uint64(30))) * _SPLITMIX_M1
    z = (z ^ (z >> np.uint64(27))) * _SPLITMIX_M2
    return z ^ (z >> np.uint64(31))


def uniforms(seed: int, count: int, offset: int = 0) -> np.ndarray:
    """`count` uniforms in (0, 1] from the stream of `seed`, starting at `offset`."""
    base = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
    counters = base + np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
    bits = _splitmix64(counters)
    return (bits.astype(np.float64) + 1.0) / _TWO64


def normals(seed: int, count: int, offset: int = 0) -> np.ndarray:
    """Standard normals via Box-Muller on consecutive uniform pairs."""
    pairs = (count + 1) // 2
    u = uniforms(seed, 2 * pairs, offset)
    radius = np.sqrt(-2.0 * np.log(u[0::2]))
    angle = 2.0 * math.pi * u[1::2]
    out = np.empty(2 * pairs)
    out[0::2] = radius * np.cos(angle)
    out[1::2] = radius * np.sin(angle)
    return out[:count]


@dataclass(frozen=True)
class Periodic:
    pattern: np.ndarray
    frequency: float
    phase: float = 0.0


@dataclass(frozen=True)
class RedNoise:
    pattern: np.ndarray
    decorrelation_time: float
    seed: int


@dataclass(frozen=True)
class Modulated:
    pattern: np.ndarray
    carrier_frequency: float
    envelope_decorrelation_time: float
    seed: int


@dataclass(frozen=True)
class SyntheticFieldSpec:
    """Generative description of a surrogate gridded field.

    dt is one month throughout; `months` is the sample count and `grid_points`
    the spatial dimension. `cell_weights` become the dataset's inner-product
    weights (grid cell areas); default ones.
    """

    grid_points: int
    months: int
    components: tuple = ()
    cell_weights: np.ndarray = None
    noise_amplitude: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.grid_points < 1 or self.months < 1:
            raise ValueError("grid_points and months must both be at least 1")
        if self.noise_amplitude < 0:
            raise ValueError("noise amplitude must be nonnegative")
        object.__setattr__(self, "components", tuple(self.components))
        for comp in self.components:
            pattern = np.asarray(comp.pattern, dtype=np.float64)
            if pattern.shape != (self.grid_points,):
                raise ValueError(
                    f"component pattern shape {pattern.shape} does not match grid ({self.grid_points},)")


def _ar1(seed: int, count: int, tau: float, dt: float) -> np.ndarray:
    """Stationary unit-variance AR(1) with coefficient exp(-dt / tau)."""
    if tau <= 0:
        raise ValueError("decorrelation time must be positive")
    a = math.exp(-dt / tau)
    drive = math.sqrt(1.0 - a * a)
    noise = normals(seed, count)
    out = np.empty(count)
    out[0] = noise[0]
    for k in range(1, count):
        out[k] = a * out[k - 1] + drive * noise[k]
    return out


def temporal_law(component, times: np.ndarray, dt: float) -> np.ndarray:
    if isinstance(component, Periodic):
        return np.cos(2.0 * math.pi * component.frequency * times + component.phase)
    if isinstance(component, RedNoise):
        return _ar1(component.seed, times.shape[0], component.decorrelation_time, dt)
    if isinstance(component, Modulated):
        carrier = np.cos(2.0 * math.pi * component.carrier_frequency * times)
        envelope = _ar1(component.seed, times.shape[0], component.envelope_decorrelation_time, dt)
        return carrier * envelope
    raise TypeError(f"unknown component type {type(component).__name__}")


def generate_field(spec: SyntheticFieldSpec):
    """Materialize the field as a TimeSeriesDataset with dt = 1 month."""
    from .dataset import TimeSeriesDataset

    dt = 1.0
    times = dt * np.arange(spec.months)
    samples = np.zeros((spec.months, spec.grid_points))
    for comp in spec.components:
        pattern = np.asarray(comp.pattern, dtype=np.float64)
        samples += temporal_law(comp, times, dt)[:, None] * pattern[None, :]
    if spec.noise_amplitude > 0.0:
        white = normals(spec.seed, spec.months * spec.grid_points)
        samples += spec.noise_amplitude * white.reshape(spec.months, spec.grid_points)
    return TimeSeriesDataset(samples=samples, dt=dt, weights=spec.cell_weights, time_origin=0.0)


def random_pattern(seed: int, grid_points: int, index: int = 0) -> np.ndarray:
    """Deterministic unit-RMS spatial pattern drawn from the seed's stream.

    `index` offsets into the stream so several distinct patterns can share a seed.
    """
    raw = normals(seed, grid_points, offset=2 * grid_points * index)
    rms = math.sqrt(float(np.mean(raw * raw)))
    return raw / rms if rms > 0 else raw
