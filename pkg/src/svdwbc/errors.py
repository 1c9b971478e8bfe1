"""Exception types shared across the package."""


class PoleError(ValueError):
    """A spectral parameter hit a pole of the Boltzmann weights or a kernel."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach the requested tolerance."""

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual
