"""Pairwise kernels adapted to the dynamical flow, and sparse k-NN kernel matrices.

Three families:

* ``isotropic_gaussian``: exp(-||w||^2 / eps), the standard choice.
* ``cone_geometric``: distances scaled by the geometric mean of the velocity
  norms at the two samples, with an angular factor that concentrates affinity
  on displacements aligned with the flow. The angular strength is zeta in
  [0, 1); zeta = 0 recovers the locally scaled kernel with no angular term.
* ``cone_mean``: the variant built from arithmetic/harmonic means of the same
  quantities; identical local expansion, different finite-distance behavior.

All displacement norms, velocity norms, and angle cosines are taken in the
dataset's diagonal metric. Cone values are invariant under scaling of the data
by a constant; the isotropic Gaussian is not (unless eps is rescaled).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse

from .dataset import TimeSeriesDataset, trim, weighted_inner, weighted_norm
from .errors import DegenerateVelocityError
from .velocity import VelocityEstimate

_FAMILIES = ("isotropic_gaussian", "cone_geometric", "cone_mean")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus its parameters.

    zeta is the angular-influence parameter of the cone families, in [0, 1).
    epsilon is the scale: mandatory meaning for the isotropic Gaussian, an
    optional extra multiplier for cone families (default 1 leaves the cone
    kernels in their canonical form).
    """

    family: str = "cone_geometric"
    zeta: float = 0.0
    epsilon: float = 1.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {_FAMILIES}")
        if not 0.0 <= self.zeta < 1.0:
            raise ValueError(f"zeta must lie in [0, 1), got {self.zeta}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


@dataclass(frozen=True)
class SparseKernelMatrix:
    """Symmetric k-NN-truncated kernel matrix on the trimmed sample set.

    ``matrix`` is CSR with sorted indices; the diagonal is present and equals 1,
    and the sparsity pattern is symmetric with K_ij = K_ji bitwise.
    """

    matrix: sparse.csr_matrix
    neighbors: int

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def truncation_level(self) -> float:
        """Smallest retained off-diagonal value (diagnostic for k-NN truncation)."""
        coo = self.matrix.tocoo()
        off = coo.data[coo.row != coo.col]
        return float(off.min()) if off.size else float("nan")


def _cos_sq(inner, norm_prod_sq):
    """cos^2 of the angle from inner products, clamped to [0, 1]; 0 where degenerate."""
    with np.errstate(invalid="ignore", divide="ignore"):
        c2 = np.where(norm_prod_sq > 0.0, (inner * inner) / norm_prod_sq, 0.0)
    return np.minimum(c2, 1.0)


def eval_isotropic(x_i, x_j, spec: KernelSpec, weights) -> float:
    """exp(-||x_j - x_i||^2 / eps) in the weighted metric."""
    omega = np.asarray(x_j, dtype=np.float64) - np.asarray(x_i, dtype=np.float64)
    d2 = weighted_inner(omega, omega, weights)
    return float(np.exp(-d2 / spec.epsilon))


def eval_cone(x_i, x_j, xi_i, xi_j, spec: KernelSpec, weights) -> float:
    """Geometric-mean cone kernel between two samples with velocities xi_i, xi_j.

    Returns exactly 1 when the displacement vanishes (the angle cosine is
    defined as 0 there, which only matters for intermediate arithmetic).
    """
    ni = weighted_norm(xi_i, weights)
    nj = weighted_norm(xi_j, weights)
    if ni == 0.0 or nj == 0.0:
        raise DegenerateVelocityError("cone kernel undefined for zero velocity norm")
    omega = np.asarray(x_j, dtype=np.float64) - np.asarray(x_i, dtype=np.float64)
    d2 = weighted_inner(omega, omega, weights)
    if d2 == 0.0:
        return 1.0
    ci2 = _cos_sq(weighted_inner(xi_i, omega, weights), ni * ni * d2)
    cj2 = _cos_sq(weighted_inner(xi_j, omega, weights), nj * nj * d2)
    exponent = d2 / (spec.epsilon * ni * nj) * np.sqrt((1.0 - spec.zeta * ci2) * (1.0 - spec.zeta * cj2))
    return float(np.exp(-exponent))


def eval_cone_mean(x_i, x_j, xi_i, xi_j, spec: KernelSpec, weights) -> float:
    """Arithmetic/harmonic-mean cone kernel variant.

    exp(-(||w||^2 / 4) (1/||xi_i||^2 + 1/||xi_j||^2) (2 - zeta cos^2 t_i - zeta cos^2 t_j) / eps).
    Coincides with :func:`eval_cone` when the two norms and the two cosines agree.
    """
    ni = weighted_norm(xi_i, weights)
    nj = weighted_norm(xi_j, weights)
    if ni == 0.0 or nj == 0.0:
        raise DegenerateVelocityError("cone kernel undefined for zero velocity norm")
    omega = np.asarray(x_j, dtype=np.float64) - np.asarray(x_i, dtype=np.float64)
    d2 = weighted_inner(omega, omega, weights)
    if d2 == 0.0:
        return 1.0
    ci2 = _cos_sq(weighted_inner(xi_i, omega, weights), ni * ni * d2)
    cj2 = _cos_sq(weighted_inner(xi_j, omega, weights), nj * nj * d2)
    exponent = (d2 / 4.0) * (1.0 / ni**2 + 1.0 / nj**2) * (2.0 - spec.zeta * ci2 - spec.zeta * cj2) / spec.epsilon
    return float(np.exp(-exponent))


def _block_values(spec, Xs, sq_norms, Xis, xi_dot_x, xi_norms, start, stop):
    """Kernel values for rows [start, stop) against all columns.

    Xs and Xis are the samples and velocities pre-scaled by sqrt(weights);
    sq_norms[i] = ||x_i||^2 and xi_dot_x[i] = (xi_i, x_i) in that metric.
    """
    gram = Xs[start:stop] @ Xs.T
    d2 = sq_norms[start:stop, None] + sq_norms[None, :] - 2.0 * gram
    np.maximum(d2, 0.0, out=d2)
    zero = d2 == 0.0
    if spec.family == "isotropic_gaussian":
        vals = np.exp(-d2 / spec.epsilon)
    else:
        # (xi_i, x_j - x_i) and (xi_j, x_j - x_i) for the row block
        inner_i = Xis[start:stop] @ Xs.T - xi_dot_x[start:stop, None]
        inner_j = xi_dot_x[None, :] - Xs[start:stop] @ Xis.T
        ni = xi_norms[start:stop, None]
        nj = xi_norms[None, :]
        ci2 = _cos_sq(inner_i, (ni * ni) * d2)
        cj2 = _cos_sq(inner_j, (nj * nj) * d2)
        if spec.family == "cone_geometric":
            exponent = d2 / (spec.epsilon * (ni * nj)) * np.sqrt(
                (1.0 - spec.zeta * ci2) * (1.0 - spec.zeta * cj2))
        else:
            exponent = (d2 / 4.0) * (1.0 / ni**2 + 1.0 / nj**2) * (
                2.0 - spec.zeta * ci2 - spec.zeta * cj2) / spec.epsilon
        vals = np.exp(-exponent)
    vals[zero] = 1.0
    return vals


def _retain_top(values, b):
    """Column indices of the b largest entries of a row, ties broken by smaller index."""
    s = values.shape[0]
    if b >= s:
        return np.arange(s)
    part = np.argpartition(-values, b - 1)[:b]
    threshold = values[part].min()
    strict = np.flatnonzero(values > threshold)
    ties = np.flatnonzero(values == threshold)
    return np.concatenate([strict, ties[: b - strict.size]])


def build_kernel_matrix(
    data: TimeSeriesDataset,
    velocity: VelocityEstimate | None,
    spec: KernelSpec,
    b: int | None = None,
    velocity_floor: float = 0.0,
    value_floor: float = 0.0,
    block_size: int = 512,
    threads: int = 1,
) -> SparseKernelMatrix:
    """Assemble the symmetric k-NN-truncated kernel matrix.

    The velocity trim is applied to ``data`` so kernel rows align with the
    stencil outputs. For each row the b largest kernel values are retained
    (the diagonal value 1 is always among them) and the edge set is
    symmetrized by union, keeping values unchanged. ``b = None`` or
    ``b = s_eff`` disables truncation. Entries below ``value_floor`` are
    pruned afterwards (off by default).

    Row blocks are evaluated independently, so the edge set does not depend
    on ``block_size`` or ``threads``.
    """
    if spec.family == "isotropic_gaussian":
        if velocity is not None:
            data = trim(data, velocity.trim_left, velocity.trim_right)
        xi_norms = None
        Xis = None
        xi_dot_x = None
    else:
        if velocity is None:
            raise ValueError(f"{spec.family} kernel requires a velocity estimate")
        data = trim(data, velocity.trim_left, velocity.trim_right)
        if velocity.n_samples != data.n_samples:
            raise ValueError(
                f"velocity has {velocity.n_samples} samples but trimmed dataset has {data.n_samples}")
        xi_norms = velocity.floored_norms(velocity_floor)

    s_eff = data.n_samples
    if b is None:
        b = s_eff
    b = int(b)
    if not 1 <= b <= s_eff:
        raise ValueError(f"neighbor count b={b} out of range [1, {s_eff}]")

    sqrt_w = np.sqrt(data.weights)
    Xs = data.samples * sqrt_w
    sq_norms = np.sum(Xs * Xs, axis=1)
    if xi_norms is not None:
        Xis = velocity.xi * sqrt_w
        xi_dot_x = np.sum(Xis * Xs, axis=1)

    starts = list(range(0, s_eff, block_size))

    def process(start):
        stop = min(start + block_size, s_eff)
        vals = _block_values(spec, Xs, sq_norms, Xis, xi_dot_x, xi_norms, start, stop)
        vals[np.arange(stop - start), np.arange(start, stop)] = 1.0
        rows_blk = []
        cols_blk = []
        vals_blk = []
        for local in range(stop - start):
            keep = _retain_top(vals[local], b)
            rows_blk.append(np.full(keep.size, start + local, dtype=np.int64))
            cols_blk.append(keep.astype(np.int64))
            vals_blk.append(vals[local, keep])
        return np.concatenate(rows_blk), np.concatenate(cols_blk), np.concatenate(vals_blk)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(process, starts))
    else:
        results = [process(start) for start in starts]

    rows = np.concatenate([r for r, _, _ in results])
    cols = np.concatenate([c for _, c, _ in results])
    vals = np.concatenate([v for _, _, v in results])

    # union symmetrization: keep an edge if either endpoint retained it;
    # values are bitwise symmetric so duplicates are identical
    keys = np.concatenate([rows * s_eff + cols, cols * s_eff + rows])
    vals2 = np.concatenate([vals, vals])
    _, first = np.unique(keys, return_index=True)
    keys = keys[first]
    vals2 = vals2[first]
    if value_floor > 0.0:
        mask = (vals2 >= value_floor) | (keys // s_eff == keys % s_eff)
        keys = keys[mask]
        vals2 = vals2[mask]
    matrix = sparse.csr_matrix(
        (vals2, (keys // s_eff, keys % s_eff)), shape=(s_eff, s_eff))
    matrix.sort_indices()
    return SparseKernelMatrix(matrix=matrix, neighbors=b)
