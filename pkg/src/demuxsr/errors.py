"""Exception hierarchy shared by all modules."""


class DemuxError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(DemuxError, ValueError):
    """Input data violates a type invariant."""


class DomainError(DemuxError, ValueError):
    """Argument outside the domain of the operation."""


class DegeneratePSFError(DemuxError):
    """Transfer function whose derivative norm is zero or non-finite."""


class AccuracyError(DemuxError):
    """Numerical quadrature did not reach the requested accuracy."""


class FitError(DemuxError):
    """Parabola fit could not be carried out."""


class SingularModelError(DemuxError):
    """The qubit model is singular at the requested parameters."""


class InsufficientDataError(DemuxError, ValueError):
    pass


class UnsupportedSamplerError(DemuxError):
    pass


class ConfigError(DemuxError):
    """Malformed or inconsistent experiment configuration."""
