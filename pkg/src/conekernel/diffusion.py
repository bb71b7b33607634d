"""Diffusion-map normalization, Markov operator, discrete Laplacian, and Hodge calculus.

Starting from a symmetric kernel matrix K the operator is built as

    K~_ij = K_ij / (q_i^alpha q_j^alpha),   q_i = sum_k K_ik
    D_ii  = sum_k K~_ik
    P_ij  = K~_ij / D_ii

P is row-stochastic and similar to the symmetric matrix
S = D^{-1/2} K~ D^{-1/2}, so its spectrum is real and lies in [-1, 1]. The
stationary distribution is pi_i = D_ii / sum_k D_kk in closed form, and the
discrete diffusion operator is L = I - P.

Vertex and edge functions carry the weighted Hodge inner products

    (f, f')_P = sum_i pi_i f_i f'_i
    (w, w')_P = sum_ij pi_i P_ij w_ij w'_ij / 2

under which the difference operator (d f)_ij = f_j - f_i and the
codifferential are adjoint, and L = codifferential . difference.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse

from .errors import DisconnectedSampleError
from .kernels import SparseKernelMatrix


def _as_csr(kernel) -> sparse.csr_matrix:
    if isinstance(kernel, SparseKernelMatrix):
        return kernel.matrix
    mat = sparse.csr_matrix(kernel)
    mat.sort_indices()
    return mat


def _row_indices(mat: sparse.csr_matrix) -> np.ndarray:
    return np.repeat(np.arange(mat.shape[0]), np.diff(mat.indptr))


def dm_normalize(kernel, alpha: float = 1.0):
    """Density normalization K~_ij = K_ij / (q_i q_j)^alpha on the same support.

    Returns (k_tilde, degrees) where degrees are the row sums of K~ taken
    after normalization. alpha = 1 removes the sampling-density bias; alpha = 0
    leaves the kernel unchanged.
    """
    mat = _as_csr(kernel)
    q = np.asarray(mat.sum(axis=1)).ravel()
    bad = np.flatnonzero(q <= 0.0)
    if bad.size:
        raise DisconnectedSampleError(f"sample {bad[0]} has zero kernel row sum")
    k_tilde = mat.copy()
    if alpha != 0.0:
        scale = q ** (-alpha)
        rows = _row_indices(mat)
        # symmetric pairing keeps K~_ij = K~_ji bitwise
        k_tilde.data = mat.data * (scale[rows] * scale[mat.indices])
    degrees = np.asarray(k_tilde.sum(axis=1)).ravel()
    bad = np.flatnonzero(degrees <= 0.0)
    if bad.size:
        raise DisconnectedSampleError(f"sample {bad[0]} has zero degree after normalization")
    return k_tilde, degrees


def markov_operator(k_tilde: sparse.csr_matrix, degrees: np.ndarray):
    """Row-stochastic Markov matrix P = K~ / D and its stationary distribution.

    pi_i = D_ii / sum_k D_kk satisfies pi P = pi in exact arithmetic because
    K~ is symmetric.
    """
    degrees = np.asarray(degrees, dtype=np.float64)
    bad = np.flatnonzero(degrees <= 0.0)
    if bad.size:
        raise DisconnectedSampleError(f"sample {bad[0]} has zero degree")
    markov = k_tilde.copy()
    markov.data = k_tilde.data / degrees[_row_indices(k_tilde)]
    pi = degrees / degrees.sum()
    return markov, pi


@dataclass(frozen=True)
class DiffusionOperator:
    """Normalized kernel, Markov matrix, degrees, and stationary distribution."""

    alpha: float
    k_tilde: sparse.csr_matrix
    degrees: np.ndarray
    markov: sparse.csr_matrix
    pi: np.ndarray
    _transpose_perm_cache: list = field(default_factory=list, repr=False, compare=False)

    @property
    def size(self) -> int:
        return self.markov.shape[0]

    def symmetric_conjugate(self) -> sparse.csr_matrix:
        """S = D^{-1/2} K~ D^{-1/2}, bitwise-symmetric and similar to P."""
        scale = 1.0 / np.sqrt(self.degrees)
        s_mat = self.k_tilde.copy()
        rows = _row_indices(self.k_tilde)
        s_mat.data = self.k_tilde.data * (scale[rows] * scale[self.k_tilde.indices])
        return s_mat

    def transpose_permutation(self) -> np.ndarray:
        """Permutation mapping each stored entry (i, j) to the slot of (j, i).

        Requires the symmetric sparsity pattern the constructors guarantee.
        """
        if not self._transpose_perm_cache:
            marker = sparse.csr_matrix(
                (np.arange(self.markov.nnz, dtype=np.int64), self.markov.indices, self.markov.indptr),
                shape=self.markov.shape,
            )
            transposed = marker.T.tocsr()
            transposed.sort_indices()
            if not np.array_equal(transposed.indptr, self.markov.indptr) or not np.array_equal(
                    transposed.indices, self.markov.indices):
                raise ValueError("sparsity pattern is not symmetric")
            self._transpose_perm_cache.append(transposed.data.astype(np.int64))
        return self._transpose_perm_cache[0]


def build_operator(kernel, alpha: float = 1.0) -> DiffusionOperator:
    """Run the full normalization sequence on a kernel matrix."""
    k_tilde, degrees = dm_normalize(kernel, alpha)
    markov, pi = markov_operator(k_tilde, degrees)
    return DiffusionOperator(alpha=alpha, k_tilde=k_tilde, degrees=degrees, markov=markov, pi=pi)


@dataclass(frozen=True)
class EdgeFunction:
    """Values on the directed edges of the kernel graph, stored in the CSR slot
    order of the operator's sparsity pattern."""

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    @property
    def size(self) -> int:
        return self.indptr.shape[0] - 1

    def reversed_data(self, op: DiffusionOperator) -> np.ndarray:
        """Edge values with every edge (i, j) replaced by the value on (j, i)."""
        return self.data[op.transpose_permutation()]


def edge_function(op: DiffusionOperator, values) -> EdgeFunction:
    """Wrap per-edge values given in CSR slot order, as a dense matrix, or sparse.

    Sparse input must store a value for every edge of the operator's support
    (explicit zeros count); a missing edge raises naming the offending edge.
    """
    pattern = op.markov
    rows = _row_indices(pattern)
    if sparse.issparse(values):
        vmat = values.tocsr()
        if vmat.shape != pattern.shape:
            raise ValueError(f"edge matrix shape {vmat.shape} does not match operator {pattern.shape}")
        marker = sparse.csr_matrix(
            (np.arange(1, vmat.nnz + 1, dtype=np.int64), vmat.indices, vmat.indptr), shape=vmat.shape)
        pos = np.asarray(marker[rows, pattern.indices]).ravel().astype(np.int64)
        if np.any(pos == 0):
            k = int(np.flatnonzero(pos == 0)[0])
            raise ValueError(f"edge ({rows[k]}, {pattern.indices[k]}) has no value")
        data = vmat.data[pos - 1].astype(np.float64)
    else:
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim == 2:
            if arr.shape != pattern.shape:
                raise ValueError(f"edge matrix shape {arr.shape} does not match operator {pattern.shape}")
            data = arr[rows, pattern.indices].copy()
        else:
            if arr.shape != pattern.data.shape:
                raise ValueError(
                    f"expected {pattern.data.shape[0]} edge values in slot order, got {arr.shape}")
            data = arr.copy()
    return EdgeFunction(indptr=pattern.indptr, indices=pattern.indices, data=data)


def edge_difference(op: DiffusionOperator, f) -> EdgeFunction:
    """(d f)_ij = f_j - f_i on the operator's support."""
    f = _check_vertex(op, f)
    pattern = op.markov
    data = f[pattern.indices] - f[_row_indices(pattern)]
    return EdgeFunction(indptr=pattern.indptr, indices=pattern.indices, data=data)


def _check_vertex(op: DiffusionOperator, f) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (op.size,):
        raise ValueError(f"vertex function must have length {op.size}, got shape {f.shape}")
    return f


def laplacian_apply(op: DiffusionOperator, f) -> np.ndarray:
    """(I - P) f."""
    f = _check_vertex(op, f)
    return f - op.markov @ f


def codifferential(op: DiffusionOperator, w: EdgeFunction) -> np.ndarray:
    """Adjoint of the difference operator: sum_j P_ij (w_ji - w_ij) / 2 per vertex."""
    if w.data.shape != op.markov.data.shape:
        raise ValueError("edge function does not match the operator support")
    contrib = op.markov.data * (w.reversed_data(op) - w.data) * 0.5
    return np.bincount(_row_indices(op.markov), weights=contrib, minlength=op.size)


def hodge_inner_vertex(f, g, pi) -> float:
    """(f, g)_P = sum_i pi_i f_i g_i."""
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    pi = np.asarray(pi, dtype=np.float64)
    if f.shape != g.shape or f.shape != pi.shape:
        raise ValueError(f"length mismatch: f {f.shape}, g {g.shape}, pi {pi.shape}")
    return float(np.sum(pi * (f * g)))


def hodge_inner_edge(w: EdgeFunction, w2: EdgeFunction, op: DiffusionOperator) -> float:
    """(w, w')_P = sum_ij pi_i P_ij w_ij w'_ij / 2."""
    if w.data.shape != op.markov.data.shape or w2.data.shape != op.markov.data.shape:
        raise ValueError("edge functions do not match the operator support")
    rows = _row_indices(op.markov)
    return float(np.sum(op.pi[rows] * op.markov.data * (w.data * w2.data)) / 2.0)
