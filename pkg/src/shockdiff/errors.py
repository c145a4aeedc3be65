"""Exception types shared across the solver."""


class RadicandError(ValueError):
    """Raised when a shock-speed radicand r^2 - cbar^2 goes negative."""


class PoleError(ValueError):
    """Raised when the Cartesian shock slope is evaluated at xi^2 = cbar^2."""


class ConvergenceError(RuntimeError):
    """Raised when an iteration fails to reach its tolerance.

    Carries the residual history in ``history`` when available.
    """

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []
