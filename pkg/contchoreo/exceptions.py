from typing import Optional


class ChoreoException(Exception):
    """Generic exception."""

    #: Process exit status used by :mod:`contchoreo.command`.
    exit_code: int = 1


class ChoreoConfigurationException(ChoreoException):
    """Indicates a configuration error.

    For example a spectrum computed for another σ, or with fewer modes than the loop it is
    applied to. This can be corrected by the caller.
    """

    exit_code = 2


class ChoreoDomainError(ChoreoException, ValueError):
    """A parameter lies outside the domain of the operation (e.g. σ ∉ (0, 1))."""

    exit_code = 2


class ChoreoSingularityError(ChoreoDomainError):
    """A singular weight was requested exactly at one of its poles."""


class ChoreoQuadratureError(ChoreoException):
    """A quadrature failed to converge under refinement."""

    exit_code = 3


class ChoreoNonIntegrableError(ChoreoQuadratureError):
    """The integrand carries a singularity that is not integrable."""


class ChoreoCollisionError(ChoreoException):
    """Two bodies (or two points of a loop) coincide."""

    exit_code = 4

    def __init__(self, message: str, pair: Optional[tuple[float, float]] = None):
        """Construct the error.

        Args:
            message: The error message to display.
            pair: The offending body indices or loop parameters.
        """
        self.pair = pair
        super().__init__(message)


class ChoreoInfiniteActionError(ChoreoCollisionError):
    """The action diverges because the loop collides with itself at (s, r)."""


class ChoreoDegenerateCurveError(ChoreoException):
    """The loop is not a regular simple closed curve where it needs to be."""

    exit_code = 4


class ChoreoConsistencyError(ChoreoException):
    """Two independent evaluations of the same quantity disagree."""

    exit_code = 3


class ChoreoNonConvergenceError(ChoreoException):
    """An iterative method stopped before reaching its tolerance."""

    exit_code = 5
