"""Exception hierarchy shared by the library and the CLI."""


class GaussQfiError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameter(GaussQfiError, ValueError):
    """Raised for out-of-range or non-finite inputs."""


class NonOptimalPhases(InvalidParameter):
    """Raised when a closed-form route is called with phases that do not maximise the QFI."""


class InvalidState(GaussQfiError, ValueError):
    """Raised when a covariance matrix is not Hermitian, not physical or too ill-conditioned."""


class NumericalInconsistency(GaussQfiError, ArithmeticError):
    """Raised when two quantities that must agree (or a sign that must hold) do not."""


class ConvergenceFailure(GaussQfiError, ArithmeticError):
    """Raised when an extrapolation does not settle; carries the competing estimates."""

    def __init__(self, message: str, estimates: tuple = ()):
        super().__init__(message)
        self.estimates = estimates


class TruncationError(GaussQfiError, ValueError):
    """Raised when a Fock-space cutoff discards more norm than allowed."""
