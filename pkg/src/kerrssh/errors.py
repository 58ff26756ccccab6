"""Exception hierarchy.

Numerical failures derive from :class:`NumericalError`; bad inputs derive from
:class:`ConfigError`.  The CLI maps the former to exit code 1 and the latter to 2.
"""


class KerrSSHError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(KerrSSHError, ValueError):
    """Invalid configuration, file, or argument."""


class ShapeError(ConfigError):
    """Array with the wrong length or shape."""


class PreconditionError(KerrSSHError):
    """An operation was called outside its domain of validity."""


class NumericalError(KerrSSHError):
    """A numerical procedure failed."""


class ConvergenceTimeout(NumericalError):
    """Time integration reached ``t_max`` before the derivative vanished."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class NewtonError(NumericalError):
    """Newton iteration did not converge; ``best`` holds the best iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SingularJacobianError(NewtonError):
    pass


class DegenerateCubicError(NumericalError):
    pass


class PoleError(NumericalError):
    """A denominator of the cubic reduction vanished."""

    def __init__(self, message, culprit=None):
        super().__init__(message)
        self.culprit = culprit


class InstabilityBoundaryError(NumericalError):
    """Squeezing is undefined: the detuning does not exceed twice the anomalous coupling."""


class RWAError(PreconditionError):
    """The rotating-wave reduction was refused."""


class AggregationError(PreconditionError):
    """Site parameters are too non-uniform to define a single SSH model."""


class TopologyUndefinedError(NumericalError):
    """The Bloch vector touches the origin, so the winding number is undefined."""


class ResolutionError(NumericalError):
    """The k-grid is too coarse to resolve the phase winding."""


class SingularMatrixError(NumericalError):
    pass


class UnstableStateError(PreconditionError):
    """The steady state is dynamically unstable."""


class SweepError(NumericalError):
    """A solver failure inside a parameter sweep, annotated with the grid index."""

    def __init__(self, message, index=None, cause=None):
        super().__init__(message)
        self.index = index
        self.cause = cause


class KerrSSHWarning(UserWarning):
    """Base class for warnings emitted by this package."""


class PhaseWarning(KerrSSHWarning):
    """The anomalous-coupling phase is too large to be dropped."""


class DispersiveWarning(KerrSSHWarning):
    """The dispersive small parameter is not small."""


class AggregationWarning(KerrSSHWarning):
    """Site parameters were aggregated despite exceeding the uniformity tolerances."""


class ZeroModeCountWarning(KerrSSHWarning):
    """The number of mid-gap modes differs from twice the winding number."""
