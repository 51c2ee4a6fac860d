"""Exception types raised across the package."""


class QoptError(Exception):
    """Base class for all package errors."""


class NonHermitianError(QoptError, ValueError):
    pass


class NoConvergenceError(QoptError, ArithmeticError):
    """An iterative numerical routine exceeded its iteration cap."""


class ShapeError(QoptError, ValueError):
    pass


class BoundsError(QoptError, ValueError):
    """A control amplitude lies outside the active bounds."""


class StaleCacheError(QoptError, RuntimeError):
    """A propagation cache was queried while slices were still dirty."""


class DegeneratePhaseWarning(UserWarning):
    """The overlap vanished, so the PSU phase factor is undefined."""


class ConfigError(QoptError, ValueError):
    """Malformed or inconsistent benchmark configuration."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownProblemError(ConfigError):
    pass


class InvalidSchemeError(ConfigError):
    pass
