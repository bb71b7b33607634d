"""Finite-difference estimation of the phase-space velocity from time-ordered samples.

The stencil output ``xi_i = sum_j w_j X_{i+j}`` approximates ``dt * dX/dt`` at
sample i to order p+1, so ``xi_i / dt`` is a p-th order estimate of the
pushforward of the dynamical vector field. Samples where the stencil does not
fit are trimmed, never substituted with one-sided fallbacks.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .dataset import TimeSeriesDataset
from .errors import DegenerateVelocityError

# First-derivative weights normalized so that sum(w) = 0 and sum(j * w_j) = 1,
# i.e. the stencil applied to X_i = c * t_i returns exactly c * dt.
_WEIGHT_TABLE = {
    ("central", 2): ((-1, Fraction(-1, 2)), (0, Fraction(0)), (1, Fraction(1, 2))),
    ("central", 4): (
        (-2, Fraction(1, 12)), (-1, Fraction(-2, 3)), (0, Fraction(0)),
        (1, Fraction(2, 3)), (2, Fraction(-1, 12)),
    ),
    ("central", 6): (
        (-3, Fraction(-1, 60)), (-2, Fraction(3, 20)), (-1, Fraction(-3, 4)), (0, Fraction(0)),
        (1, Fraction(3, 4)), (2, Fraction(-3, 20)), (3, Fraction(1, 60)),
    ),
    ("backward", 1): ((-1, Fraction(-1)), (0, Fraction(1))),
    ("backward", 2): ((-2, Fraction(1, 2)), (-1, Fraction(-2)), (0, Fraction(3, 2))),
    ("forward", 1): ((0, Fraction(-1)), (1, Fraction(1))),
    ("forward", 2): ((0, Fraction(-3, 2)), (1, Fraction(2)), (2, Fraction(-1, 2))),
}


@dataclass(frozen=True)
class FdScheme:
    """Finite-difference scheme for the first derivative.

    kind is one of 'central', 'backward', 'forward'; order is the accuracy
    order p. Supported pairs: central p in {2, 4, 6}, backward/forward p in {1, 2}.
    """

    kind: str = "central"
    order: int = 4

    def __post_init__(self):
        if (self.kind, self.order) not in _WEIGHT_TABLE:
            supported = ", ".join(f"{k} p={p}" for k, p in sorted(_WEIGHT_TABLE))
            raise ValueError(
                f"unsupported finite-difference scheme ({self.kind}, p={self.order}); "
                f"supported: {supported}"
            )


def fd_weights(scheme: FdScheme):
    """Stencil for the scheme as an ordered list of (offset, weight) pairs.

    Weights are exact rationals rendered to binary64.
    """
    return [(offset, float(w)) for offset, w in _WEIGHT_TABLE[(scheme.kind, scheme.order)]]


@dataclass(frozen=True)
class VelocityEstimate:
    """Stencil outputs xi_i (units of the observations; the dt factor is included),
    their weighted norms, and the trim margins imposed by the stencil."""

    xi: np.ndarray
    norms: np.ndarray
    trim_left: int
    trim_right: int

    @property
    def n_samples(self) -> int:
        return self.xi.shape[0]

    def floored_norms(self, floor: float = 0.0) -> np.ndarray:
        """Norms with an optional positive floor substituted for zeros.

        Using a floor alters the method: kernels then see a bounded scaling
        factor instead of failing on stationary samples.
        """
        if floor < 0:
            raise ValueError("velocity floor must be nonnegative")
        if floor == 0.0:
            if np.any(self.norms == 0.0):
                i = int(np.argmin(self.norms))
                raise DegenerateVelocityError(
                    f"sample {i} has zero velocity norm; supply a positive velocity floor "
                    "to override (this changes the method)"
                )
            return self.norms
        return np.maximum(self.norms, floor)


def estimate_velocity(data: TimeSeriesDataset, scheme: FdScheme = FdScheme()) -> VelocityEstimate:
    """Apply the stencil to every sample where it fits.

    Returns xi aligned with ``data.samples[trim_left : s - trim_right]`` and
    norms taken with the dataset weights.
    """
    pairs = _WEIGHT_TABLE[(scheme.kind, scheme.order)]
    offsets = [o for o, _ in pairs]
    trim_left = max(0, -min(offsets))
    trim_right = max(0, max(offsets))
    s = data.n_samples
    s_eff = s - trim_left - trim_right
    if s_eff < 1:
        raise ValueError(
            f"dataset with {s} samples is shorter than the ({scheme.kind}, p={scheme.order}) "
            f"stencil width {trim_left + trim_right + 1}"
        )
    xi = np.zeros((s_eff, data.dimension))
    for offset, w in pairs:
        w = float(w)
        if w != 0.0:
            xi += w * data.samples[trim_left + offset: trim_left + offset + s_eff]
    norms = np.sqrt(np.sum(data.weights * (xi * xi), axis=1))
    return VelocityEstimate(xi=xi, norms=norms, trim_left=trim_left, trim_right=trim_right)


def speed_ratio(estimate: VelocityEstimate) -> float:
    """max ||xi_i|| / min ||xi_i|| over the untrimmed range."""
    norms = estimate.norms
    nmin = norms.min()
    if nmin == 0.0:
        i = int(np.argmin(norms))
        raise DegenerateVelocityError(f"sample {i} has zero velocity norm; speed ratio undefined")
    return float(norms.max() / nmin)
