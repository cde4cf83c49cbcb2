"""Exception hierarchy.

``ForecastError`` subclasses are user-facing (bad config, bad data); the CLI
maps them to exit code 1. ``InvariantError`` signals an internal bug (exit 2).
"""


class ForecastError(Exception):
    """Base class for errors caused by user input."""


class DimensionError(ForecastError, ValueError):
    pass


class InvalidWindowError(ForecastError, ValueError):
    pass


class InsufficientDataError(ForecastError, ValueError):
    pass


class DataParseError(ForecastError, ValueError):
    def __init__(self, message: str, row: int | None = None, col: int | None = None):
        super().__init__(message)
        self.row = row
        self.col = col


class ConfigError(ForecastError, ValueError):
    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class CorruptedMappingError(ForecastError, ValueError):
    pass


class InvalidErrorMatrixError(ForecastError, ValueError):
    pass


class BudgetError(ForecastError, MemoryError):
    pass


class InvariantError(RuntimeError):
    """An internal consistency check failed."""
