"""Exception types raised across the package."""


class CoresetError(Exception):
    """Base class for all package errors."""


class NonFinite(CoresetError, ValueError):
    """Input or intermediate value contains NaN or Inf."""


class DimMismatch(CoresetError, ValueError):
    pass


class LengthMismatch(CoresetError, ValueError):
    pass


class IndexOutOfRange(CoresetError, IndexError):
    pass


class ZeroMass(CoresetError, ValueError):
    """A sampling distribution has no positive mass."""


class DegenerateInstance(CoresetError, ZeroDivisionError):
    """Full-data optimum is zero, so relative loss is undefined (separable data)."""


class ParseError(CoresetError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MoreThanTwoClasses(CoresetError, ValueError):
    pass


class InvalidShape(CoresetError, ValueError):
    pass


class ConfigError(CoresetError, ValueError):
    """Experiment configuration failed validation."""
