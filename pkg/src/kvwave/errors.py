"""Exception types raised across the package."""


class KVWaveError(Exception):
    """Base class for all package errors."""


class InvalidConfigurationError(KVWaveError, ValueError):
    pass


class ProjectionAccuracyError(KVWaveError):
    """Quadrature refinement did not reach the requested coefficient accuracy."""


class DomainMismatchError(KVWaveError, ValueError):
    pass


class InvalidToleranceError(KVWaveError, ValueError):
    pass


class InvalidDataError(KVWaveError, ValueError):
    pass


class BlowUpError(KVWaveError, FloatingPointError):
    """A time integrator produced a non-finite value.

    The partially filled trace (flagged invalid) is available as ``trace``.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class InsufficientHorizonError(KVWaveError):
    def __init__(self, message, required_t_end):
        super().__init__(message)
        self.required_t_end = required_t_end


class WrongModelError(KVWaveError, ValueError):
    pass


class StiffnessWarning(RuntimeWarning):
    """Explicit step size exceeds the stability guard dt * chi * mu_max > 1."""
