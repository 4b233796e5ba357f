"""Exception types shared across the package."""


class FrameFormatError(ValueError):
    """Raised when a pilot-frame file fails header or payload validation."""


class DegenerateColumnError(ValueError):
    """Raised when a frame column duplicates another (zero update ball)."""


class SolverError(RuntimeError):
    """Raised when the interior-point solver exhausts its step budget.

    Carries the last iterate so callers can inspect (or salvage) it.
    """

    def __init__(self, message, last_iterate=None, steps=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.steps = steps


class NumericError(RuntimeError):
    """Raised when an iterative estimator produces non-finite or diverging
    quantities.  Carries the iteration index at which the check tripped."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class ConfigError(ValueError):
    """Raised when a scenario config file or value fails validation."""
