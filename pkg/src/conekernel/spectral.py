"""Eigenfunctions of the discrete diffusion operator and their diagnostics.

The eigenproblem L phi = lambda phi with L = I - P is solved through the
symmetric conjugate S = D^{-1/2} K~ D^{-1/2}: S psi = (1 - lambda) psi and
phi = sqrt(sum(D)) D^{-1/2} psi, which makes the phi columns orthonormal under
the stationary distribution, phi^T diag(pi) phi = I. A dense solver handles
small problems; above ``dense_threshold`` a restarted Krylov iteration on S is
used with a deterministic start vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg
from scipy.sparse.linalg import ArpackNoConvergence

from .dataset import TimeSeriesDataset
from .diffusion import DiffusionOperator, hodge_inner_vertex, laplacian_apply
from .errors import SolverFailureError


@dataclass(frozen=True)
class EigenSolution:
    """Eigenpairs of L = I - P sorted by ascending eigenvalue.

    phis has one pi-orthonormal eigenfunction per column; residuals are the
    max-norm eigen-residuals ||L phi - lambda phi||_inf.
    """

    lambdas: np.ndarray
    phis: np.ndarray
    residuals: np.ndarray

    @property
    def count(self) -> int:
        return self.lambdas.shape[0]


@dataclass(frozen=True)
class EigenTimeSeries:
    """One eigenfunction read as a time series phi~(t_j) = phi_j."""

    times: np.ndarray
    values: np.ndarray
    dt: float
    index: int


def _fix_signs(phis: np.ndarray) -> np.ndarray:
    # reproducible sign convention: largest-magnitude entry of each column positive
    for k in range(phis.shape[1]):
        j = int(np.argmax(np.abs(phis[:, k])))
        if phis[j, k] < 0:
            phis[:, k] = -phis[:, k]
    return phis


def eigensolve(op: DiffusionOperator, count: int, dense_threshold: int = 2048,
               tol: float = 1e-10) -> EigenSolution:
    """Smallest `count` eigenpairs of L = I - P.

    Dense full decomposition below ``dense_threshold`` samples, restarted
    Krylov (ARPACK symmetric Lanczos) above it with iteration cap 50 * count.
    """
    s = op.size
    count = int(count)
    if not 1 <= count <= s:
        raise ValueError(f"eigenpair count {count} out of range [1, {s}]")
    s_mat = op.symmetric_conjugate()
    if s <= dense_threshold or count >= s - 1:
        sigma, psi = scipy.linalg.eigh(s_mat.toarray())
        sigma = sigma[::-1][:count]
        psi = psi[:, ::-1][:, :count]
    else:
        v0 = np.full(s, 1.0 / np.sqrt(s))
        try:
            sigma, psi = scipy.sparse.linalg.eigsh(
                s_mat, k=count, which="LA", v0=v0, tol=tol, maxiter=50 * count)
        except ArpackNoConvergence as exc:
            raise SolverFailureError(
                f"eigensolver did not converge within {50 * count} iterations "
                f"({len(exc.eigenvalues)} of {count} pairs found)",
                residuals=exc.eigenvalues,
            ) from exc
        order = np.argsort(sigma)[::-1]
        sigma = sigma[order]
        psi = psi[:, order]
    lambdas = 1.0 - sigma
    phis = _fix_signs(np.sqrt(op.degrees.sum()) * psi / np.sqrt(op.degrees)[:, None])
    residuals = np.empty(count)
    for k in range(count):
        residuals[k] = np.max(np.abs(laplacian_apply(op, phis[:, k]) - lambdas[k] * phis[:, k]))
    return EigenSolution(lambdas=lambdas, phis=phis, residuals=residuals)


def timeseries(solution: EigenSolution, index: int, data: TimeSeriesDataset) -> EigenTimeSeries:
    """Eigenfunction `index` paired with the sample times of the trimmed dataset."""
    if not 0 <= index < solution.count:
        raise ValueError(f"eigenfunction index {index} out of range [0, {solution.count})")
    if data.n_samples != solution.phis.shape[0]:
        raise ValueError(
            f"dataset has {data.n_samples} samples but eigenfunctions have "
            f"{solution.phis.shape[0]}; pass the trimmed dataset the operator was built on")
    return EigenTimeSeries(times=data.times(), values=solution.phis[:, index].copy(),
                           dt=data.dt, index=index)


def dirichlet_energy(f, op: DiffusionOperator) -> float:
    """(f, L f)_P; equals the eigenvalue for pi-normalized eigenfunctions."""
    return hodge_inner_vertex(f, laplacian_apply(op, f), op.pi)


def along_flow_energy(ts: EigenTimeSeries, pi, dt: float | None = None) -> float:
    """Discrete along-flow energy sum_i pi_i ((phi~_{i+1} - phi~_{i-1}) / (2 dt))^2.

    A relative diagnostic comparing how strongly eigenfunctions vary along the
    sampled trajectory; only interior samples contribute.
    """
    values = ts.values
    if values.shape[0] < 3:
        raise ValueError("time series must have at least 3 samples")
    pi = np.asarray(pi, dtype=np.float64)
    if pi.shape != values.shape:
        raise ValueError(f"pi must have shape {values.shape}, got {pi.shape}")
    if dt is None:
        dt = ts.dt
    rate = (values[2:] - values[:-2]) / (2.0 * dt)
    return float(np.sum(pi[1:-1] * rate * rate))


def power_spectrum(ts: EigenTimeSeries):
    """One-sided discrete Fourier power of the series.

    Returns (frequencies, power) at frequencies k / (s * dt) for
    k = 0 .. floor(s/2), with power |F_k|^2 / s for the unnormalized forward
    transform F.
    """
    values = ts.values
    s = values.shape[0]
    if s < 2:
        raise ValueError("time series must have at least 2 samples")
    coeffs = np.fft.rfft(values)
    power = (coeffs.real**2 + coeffs.imag**2) / s
    freqs = np.arange(power.shape[0]) / (s * ts.dt)
    return freqs, power


def filter_patterns(samples, pi, phis) -> np.ndarray:
    """Project data onto the span of eigenfunctions: rows -> phi phi^T diag(pi) rows.

    `samples` holds one observation per row (s x n); `phis` is an s x l block
    of pi-orthonormal eigenfunctions. The map is the pi-orthogonal projection
    onto the chosen subspace; with the complete basis it is the identity, and
    it is idempotent for any subset.
    """
    samples = np.asarray(samples, dtype=np.float64)
    phis = np.asarray(phis, dtype=np.float64)
    if phis.ndim == 1:
        phis = phis[:, None]
    pi = np.asarray(pi, dtype=np.float64)
    if samples.ndim != 2 or phis.shape[0] != samples.shape[0] or pi.shape != (samples.shape[0],):
        raise ValueError(
            f"shape mismatch: samples {samples.shape}, phis {phis.shape}, pi {pi.shape}")
    return phis @ (phis.T @ (pi[:, None] * samples))
