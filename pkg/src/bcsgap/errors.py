"""Exception and warning classes shared across the package."""


class BCSError(Exception):
    """Base class for all package errors."""


class ParameterError(BCSError, ValueError):
    """Invalid physical or numerical parameter."""


class ContractError(BCSError, ValueError):
    """Input violates a documented precondition (symmetry, admissibility, ...)."""


class ConvergenceError(BCSError, RuntimeError):
    """Iteration budget exhausted. ``best`` carries the last iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class BracketError(BCSError, ValueError):
    """Root not bracketed by the supplied interval."""


class AccuracyError(BCSError, RuntimeError):
    """Self-convergence check failed; ``values`` holds the disagreeing estimates."""

    def __init__(self, message, values=()):
        super().__init__(message)
        self.values = tuple(values)


class UnsupportedRegimeError(BCSError, ValueError):
    """Requested quantity is outside the regime handled by this package."""


class FitError(BCSError, ValueError):
    """Degenerate least-squares design."""


class MonotonicityWarning(UserWarning):
    """Samples of a function assumed monotone were found out of order."""
