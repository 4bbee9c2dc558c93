"""Exception hierarchy shared across modules."""


class CommAwareError(Exception):
    """Base class for all package errors.

    ``module`` and ``step`` identify where a numerical failure happened; the
    CLI reports them on exit.
    """

    module = "commaware"

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ConfigError(CommAwareError, ValueError):
    module = "config"

    def __init__(self, message, path=""):
        super().__init__(message)
        self.path = path

    def __str__(self):
        msg = super().__str__()
        return f"{self.path}: {msg}" if self.path else msg


class ChannelError(CommAwareError):
    module = "channel"


class PredictionError(CommAwareError):
    module = "predict"


class SolverError(CommAwareError):
    module = "solver"


class ArmijoCapReached(SolverError):
    """No backtracking exponent up to the cap gave sufficient decrease."""

    def __init__(self, cap):
        super().__init__(f"Armijo exponent exceeded cap {cap}")
        self.cap = cap
