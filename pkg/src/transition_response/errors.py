"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the map or function."""


class ConvergenceError(RuntimeError):
    """A root finder failed to converge (indicates an internal bug)."""


class NonConvergence(RuntimeError):
    """An iterative solver hit its iteration cap.

    The per-iteration residuals are kept on ``trace`` so callers can report them.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class IllConditionedFit(ValueError):
    """A regression window is too short or too narrow to be meaningful."""


class TailNotSummable(ValueError):
    """The truncated series has no summable tail for this potential."""
