"""Exception hierarchy shared across the package."""


class VemError(Exception):
    """Base class for all package errors."""


class InvalidDomainError(VemError, ValueError):
    pass


class MeshError(VemError, ValueError):
    """A mesh violates one of its structural invariants."""


class DegenerateCellError(MeshError):
    pass


class UnsupportedKineticsError(VemError, TypeError):
    pass


class SolverError(VemError, RuntimeError):
    """Krylov solve did not reach the requested residual."""

    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = stats


class StepFailure(VemError, RuntimeError):
    """The Picard loop of one time step did not converge.

    Carries the last iterate and the increment history so callers can
    inspect or save the partial state.
    """

    def __init__(self, message, last_state=None, history=None, trajectory=None):
        super().__init__(message)
        self.last_state = last_state
        self.history = list(history or [])
        self.trajectory = trajectory


class UndefinedErrorMetric(VemError, ZeroDivisionError):
    """Relative error requested against a reference with zero norm."""


class ConfigError(VemError, ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key
