class PointSplitError(Exception):
    """Base class for errors raised by pointsplit."""


class NotSubconfiguration(PointSplitError, ValueError):
    pass


class InvalidProbability(PointSplitError, ValueError):
    pass


class QuadratureFailure(PointSplitError, ArithmeticError):
    pass


class RejectionBoundViolated(PointSplitError, ValueError):
    pass


class TooLarge(PointSplitError, ValueError):
    pass


class BudgetExceeded(PointSplitError, MemoryError):
    pass


class ZeroMassAt(PointSplitError, ValueError):
    """Raised when a conditioning configuration carries no probability mass."""

    def __init__(self, config, message=None):
        self.config = config
        super().__init__(message or f"zero mass at configuration {config!r}")


class ShapeMismatch(PointSplitError, ValueError):
    pass


class ConfigError(PointSplitError, ValueError):
    """Invalid experiment configuration.

    ``field`` is the dotted path of the offending entry and ``line`` its
    1-based line number in the source file, when known.
    """

    def __init__(self, field, message, line=None):
        self.field = field
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{field}{where}: {message}")
