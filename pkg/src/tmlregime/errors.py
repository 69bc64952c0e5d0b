"""Exception hierarchy. Each family maps to one CLI exit code."""


class TMLError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ValidationError(TMLError, ValueError):
    """Bad input: malformed data, invalid parameters, unmet preconditions."""

    exit_code = 2


class NumericalError(TMLError, ArithmeticError):
    """A computation failed to produce a trustworthy number."""

    exit_code = 3


class RegimeCollapseError(NumericalError):
    """A regime received zero posterior weight during EM."""

    def __init__(self, message, last_model=None):
        super().__init__(message)
        self.last_model = last_model


class ConvergenceError(NumericalError):
    """An iterative routine did not reach its tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DataIOError(TMLError, OSError):
    """Reading or writing an artifact failed."""

    exit_code = 4


class StageError(TMLError):
    """A pipeline stage failed; keeps the exit code of the underlying error."""

    def __init__(self, stage: str, station: str, cause: Exception, hint: str = ""):
        self.stage = stage
        self.station = station
        self.cause = cause
        self.hint = hint
        self.exit_code = getattr(cause, "exit_code", NumericalError.exit_code)
        message = f"[{station}] stage '{stage}' failed: {cause}"
        if hint:
            message += f" (hint: {hint})"
        super().__init__(message)
