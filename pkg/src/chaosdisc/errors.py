"""Exception types shared across the package.

The CLI maps ConfigError to exit code 2 and the numerical-consistency
family to exit code 3; everything else is a plain failure.
"""


class ChaosDiscError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(ChaosDiscError, ValueError):
    """An argument is outside its documented domain."""


class AliasingError(ParameterError):
    """Requested truncation exceeds what the grid can represent."""


class ResolutionError(ParameterError):
    """Requested scale is below the grid resolution."""


class SingularityError(ParameterError):
    """Evaluation requested exactly on a kernel singularity."""


class InvalidKernelError(ChaosDiscError):
    """A covariance kernel is indefinite beyond the clipping tolerance."""


class ContourError(ChaosDiscError):
    """Base for argument-principle contour failures."""


class ContourDegenerateError(ContourError):
    """A contour could not be moved off a zero after repeated nudges."""


class PrecisionError(ContourError):
    """Phase tracking failed to resolve an integer winding number."""


class ConsistencyError(ChaosDiscError):
    """A cross-check between two computed routes disagreed."""


class DegreeTooSmallError(ChaosDiscError):
    """No admissible trigonometric polynomial exists at the given degree."""


class CommonZeroError(ChaosDiscError):
    """The perturbation pair search could not avoid a common zero."""


class AmbiguousDeficiencyError(ChaosDiscError):
    """Eigenvalues straddle the deficiency detection window."""


class QuadratureError(ChaosDiscError):
    """A quadrature produced a non-finite intermediate value."""


class BudgetExhaustedError(ChaosDiscError):
    """A resolution budget ran out before the computation finished."""


class ConfigError(ChaosDiscError):
    """A run configuration failed to parse or validate."""
