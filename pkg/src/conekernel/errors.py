"""Exception types shared across the package."""


class DegenerateVelocityError(ValueError):
    """A sample has zero phase-space velocity norm where a division by it is required."""


class DisconnectedSampleError(ValueError):
    """A sample has zero kernel degree and cannot participate in the Markov normalization."""


class SolverFailureError(RuntimeError):
    """The iterative eigensolver failed to converge within its iteration cap."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals
