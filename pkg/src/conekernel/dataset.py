"""Time-ordered observation data, delay embedding, centering, and the weighted inner product.

Samples are stored row-major: ``samples[i]`` is the i-th observation vector.
All inner products on data space are diagonal, ``(x, y) = sum_k w_k x_k y_k``,
with strictly positive weights (area weights for gridded fields, ones otherwise).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TimeSeriesDataset:
    """Uniformly sampled vector time series with a diagonal data-space metric.

    Parameters
    ----------
    samples : ndarray, shape (s, n)
        Observation vectors, one per row, ordered in time.
    dt : float
        Sampling interval, strictly positive.
    weights : ndarray, shape (n,), optional
        Inner-product weights, strictly positive. Defaults to ones.
    time_origin : float
        Time of the first sample.
    """

    samples: np.ndarray
    dt: float
    weights: np.ndarray = None
    time_origin: float = 0.0

    def __post_init__(self):
        samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[0] < 1:
            raise ValueError(f"samples must be a 2-d array with at least one row, got shape {np.shape(self.samples)}")
        object.__setattr__(self, "samples", samples)
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.weights is None:
            weights = np.ones(samples.shape[1])
        else:
            weights = np.asarray(self.weights, dtype=np.float64)
        if weights.shape != (samples.shape[1],):
            raise ValueError(f"weights must have shape ({samples.shape[1]},), got {weights.shape}")
        if not np.all(weights > 0):
            raise ValueError("all inner-product weights must be strictly positive")
        object.__setattr__(self, "weights", weights)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def dimension(self) -> int:
        return self.samples.shape[1]

    def times(self) -> np.ndarray:
        """Sample times ``time_origin + i * dt``."""
        return self.time_origin + self.dt * np.arange(self.n_samples)


def weighted_inner(x, y, weights) -> float:
    """Diagonal-metric inner product ``sum_k weights_k x_k y_k``.

    Symmetric in (x, y) bitwise: each term is computed as ``w * (x * y)``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if x.shape != y.shape or x.shape != w.shape:
        raise ValueError(f"length mismatch: x {x.shape}, y {y.shape}, weights {w.shape}")
    return float(np.sum(w * (x * y)))


def weighted_norm(x, weights) -> float:
    return np.sqrt(weighted_inner(x, x, weights))


def delay_embed(data: TimeSeriesDataset, q: int) -> TimeSeriesDataset:
    """Concatenate q consecutive snapshots into each sample (method of delays).

    The embedded sample at position i is ``(x_{i+q-1}, x_{i+q-2}, ..., x_i)``,
    newest snapshot first. The result has ``s - q + 1`` samples of dimension
    ``q * n``; weights are tiled q times and the time origin advances by
    ``(q - 1) * dt`` so that embedded sample times coincide with the time of
    their newest snapshot.
    """
    q = int(q)
    s, n = data.samples.shape
    if q < 1:
        raise ValueError(f"number of lags must be >= 1, got q={q}")
    if q > s:
        raise ValueError(f"number of lags q={q} exceeds sample count s={s}")
    if q == 1:
        return data
    s_out = s - q + 1
    out = np.empty((s_out, q * n))
    for lag in range(q):
        # lag-0 block holds the newest snapshot of each window
        out[:, lag * n:(lag + 1) * n] = data.samples[q - 1 - lag: q - 1 - lag + s_out]
    return TimeSeriesDataset(
        samples=out,
        dt=data.dt,
        weights=np.tile(data.weights, q),
        time_origin=data.time_origin + (q - 1) * data.dt,
    )


def center(data: TimeSeriesDataset) -> TimeSeriesDataset:
    """Subtract the per-coordinate temporal mean from every sample."""
    mean = data.samples.mean(axis=0)
    return TimeSeriesDataset(
        samples=data.samples - mean,
        dt=data.dt,
        weights=data.weights,
        time_origin=data.time_origin,
    )


def trim(data: TimeSeriesDataset, left: int, right: int) -> TimeSeriesDataset:
    """Drop `left` samples at the start and `right` at the end, advancing the time origin."""
    left = int(left)
    right = int(right)
    if left < 0 or right < 0:
        raise ValueError("trim margins must be nonnegative")
    if left + right >= data.n_samples:
        raise ValueError(f"cannot trim {left}+{right} samples from a series of length {data.n_samples}")
    stop = data.n_samples - right
    return TimeSeriesDataset(
        samples=data.samples[left:stop],
        dt=data.dt,
        weights=data.weights,
        time_origin=data.time_origin + left * data.dt,
    )
