"""Exception types shared across the package."""


class InputError(ValueError):
    """Invalid user-supplied data (configs, matrices, malformed files)."""


class DegeneracyError(ValueError):
    """A frame, restriction, or intersection fell below the rank tolerance."""


class DivergenceError(RuntimeError):
    """An orbit left the admissible region (e.g. a plane map escaping)."""


class ConvergenceError(RuntimeError):
    """An iterative solve (Newton, fixed point) failed to converge."""

    def __init__(self, message, *, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class EstimationError(RuntimeError):
    """A splitting/filtration estimate failed its internal consistency checks."""

    def __init__(self, message, *, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class GroupingError(ValueError):
    """Eigenvalue-modulus clustering was ambiguous at the tolerance boundary."""
