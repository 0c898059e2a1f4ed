"""Exception types shared across the package."""


class SingularityError(ValueError):
    """Closed-form solution evaluated too close to a zero of psi."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach its tolerance."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class FormatError(ValueError):
    """A serialized artifact is malformed (bad magic, truncation, dims)."""
