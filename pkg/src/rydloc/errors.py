"""Exception types shared across the simulation pipeline."""


class RydlocError(Exception):
    """Base class for all package-specific errors."""


class InvalidSpec(RydlocError):
    """Cloud specification violates its invariants (e.g. density above the cap)."""


class JammingUnreachable(RydlocError):
    """Sequential adsorption exhausted the per-atom attempt budget."""


class TooFewAtoms(RydlocError):
    """Operation requires more atoms than the configuration provides."""


class DuplicatePositions(RydlocError):
    """Two atoms closer than the degeneracy guard distance."""


class ConvergenceFailure(RydlocError):
    """Eigensolver did not converge."""


class NotNormalized(RydlocError):
    """State vector norm deviates from one beyond tolerance."""


class DegenerateQ(RydlocError):
    """Fractal-dimension exponent q == 1 is excluded by the definition."""


class OutOfDomain(RydlocError):
    """Argument outside the mathematical domain of the function."""


class IntegrationFailure(RydlocError):
    """ODE step control could not meet the requested tolerance."""


class InvalidState(RydlocError):
    """Density matrix violates hermiticity, trace or positivity bounds."""


class WindowTooNarrow(RydlocError):
    """Fit window contains too few samples."""


class InsufficientData(RydlocError):
    """Not enough usable data points for the requested fit."""


class NoConvergence(RydlocError):
    """Nonlinear least squares failed to converge."""


class BinningMismatch(RydlocError):
    """Accumulators with different bin edges cannot be merged."""


class EnsembleFailure(RydlocError):
    """Per-realization failures exceeded the configured budget."""
