"""Exception hierarchy shared by all tfspde modules."""


class TfspdeError(Exception):
    """Base class for all library errors."""


class DomainError(TfspdeError, ValueError):
    """An argument lies outside the domain of the function or model."""


class AccuracyError(TfspdeError, ArithmeticError):
    """A numerical tolerance could not be met under the given configuration."""


class FactorizationError(TfspdeError, ArithmeticError):
    """Cholesky factorization hit a non-positive pivot.

    Attributes
    ----------
    row : int
        Zero-based index of the failing pivot.
    pivot : float
        Value of the failing pivot.
    """

    def __init__(self, row, pivot, tol):
        self.row = row
        self.pivot = pivot
        self.tol = tol
        super().__init__(
            f"non-positive pivot {pivot:.3e} (tol {tol:.3e}) at row {row}; "
            "covariance is numerically not positive definite"
        )


class ShapeError(TfspdeError, ValueError):
    """Array shapes or grid sizes are incompatible."""


class ConfigurationError(TfspdeError, ValueError):
    """A configuration value is invalid or insufficient."""


class ProtocolError(TfspdeError, RuntimeError):
    """Two refinement levels were not driven by the same noise path."""


class DegenerateRateError(TfspdeError, ValueError):
    """A convergence rate was requested from a zero error."""
