"""Exception hierarchy shared by the numerics and the CLI."""

from typing import Optional


class QviLabError(Exception):
    """Base class for all qvi-lab errors."""

    exit_code = 3


class ConfigError(QviLabError, ValueError):
    """Invalid scenario configuration or invalid problem parameters."""

    exit_code = 2

    def __init__(self, message: str, errors: Optional[list[str]] = None):
        super().__init__(message)
        self.errors = errors or [message]


class GridMismatchError(QviLabError, ValueError):
    """Vectors or operators living on different grids were combined."""

    exit_code = 2


class SolverError(QviLabError):
    """A numerical method failed."""

    exit_code = 3


class ConvergenceError(SolverError):
    """An iteration cap was reached before the stopping rule was met."""

    def __init__(
        self,
        message: str,
        iterations: int = 0,
        residual: float = float("nan"),
        ratio: Optional[float] = None,
    ):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual
        self.ratio = ratio


class SingularMatrixError(ConvergenceError):
    """LU factorization met a pivot below the singularity threshold."""


class LineSearchError(SolverError):
    """Armijo backtracking did not find an acceptable step."""


class PenaltyPathError(SolverError):
    """Newton failed at some penalty parameter along a path."""

    def __init__(self, message: str, last_rho=None, last_iterate=None, report=None):
        super().__init__(message)
        self.last_rho = last_rho
        self.last_iterate = last_iterate
        self.report = report


class InvariantError(QviLabError):
    """A mathematical hypothesis or asserted invariant does not hold."""

    exit_code = 1


class MonotonicityError(InvariantError):
    """A sequence that must be monotone is not (signals a non-increasing map)."""


class CertificateError(InvariantError):
    """A contraction or Lipschitz certificate required by an algorithm fails."""
