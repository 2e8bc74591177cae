"""Exception types raised across the package."""


class FockngdError(Exception):
    """Base class for all package errors."""


class CutoffError(FockngdError, ValueError):
    """Cutoff below 2, index outside the truncated basis, or a cutoff too
    small to hold a target state."""


class DimensionError(FockngdError, ValueError):
    """Operands built at different cutoffs, or shapes that do not match."""


class ParameterError(FockngdError, ValueError):
    """Non-finite gate parameter or a malformed parameter layout."""


class OperatorError(FockngdError, ValueError):
    """Operator fails a structural requirement (e.g. Hermiticity)."""


class MetricError(FockngdError, RuntimeError):
    """Numerical failure while building or inverting a metric tensor."""


class DivergenceError(FockngdError, RuntimeError):
    """An optimization step produced a non-finite loss or gradient."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"optimization diverged at step {step}")


class TargetParseError(FockngdError, ValueError):
    """Malformed line in a target-state file (carries the line number)."""

    def __init__(self, path, lineno: int, message: str):
        self.path = path
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


class TargetValidationError(FockngdError, ValueError):
    """Target-state file parsed but failed validation (norm, finiteness)."""
