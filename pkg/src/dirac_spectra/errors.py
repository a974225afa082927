"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class DiracSpectraError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class DomainError(DiracSpectraError, ValueError):
    """An input violates a mathematical precondition (exit code 2)."""

    exit_code = 2


class NumericalError(DiracSpectraError, RuntimeError):
    """A numerical procedure failed to deliver the requested accuracy (exit code 3)."""

    exit_code = 3


class StepSizeError(NumericalError):
    """Adaptive step size underflowed; ``r`` is where it happened."""

    def __init__(self, message, r=None):
        super().__init__(message)
        self.r = r


class RiccatiPoleError(NumericalError):
    """A Riccati-chart solution exceeded the pole guard; switch to the angle chart."""

    def __init__(self, message, r=None):
        super().__init__(message)
        self.r = r


class ConvergenceError(NumericalError):
    pass


class GridTooCoarseError(NumericalError):
    pass


class UnresolvedClassificationError(DiracSpectraError):
    """Raised where a caller needs a bucket index but the classifier returned unresolved
    (exit code 4)."""

    exit_code = 4
