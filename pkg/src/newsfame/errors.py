"""Exception types shared across the package."""


class NewsfameError(Exception):
    """Base class for all package-specific errors."""


class InsufficientDataError(NewsfameError):
    """An operation needs more observations than are available."""


class DegenerateSampleError(NewsfameError):
    """A sample admits no meaningful fit (zero variance, all-zero fame, ...)."""


class FitConvergenceError(NewsfameError):
    """An iterative fit exhausted its budget before converging.

    Carries the best iterate seen so callers can inspect how far the
    optimizer got.
    """

    def __init__(self, message, best_params=None, residual=None):
        super().__init__(message)
        self.best_params = best_params
        self.residual = residual


class IngestionError(NewsfameError):
    """Malformed input file; carries the offending data row number."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row
