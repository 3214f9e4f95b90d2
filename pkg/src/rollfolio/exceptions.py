"""Exception hierarchy shared across the package."""


class RollfolioError(Exception):
    """Base class for all package errors."""


class DataError(RollfolioError, ValueError):
    """Malformed or unusable market data."""


class UndefinedMetricError(RollfolioError, ArithmeticError):
    """A ratio metric has a zero or empty denominator."""


class ScheduleError(RollfolioError, ValueError):
    """A weight schedule does not cover a return panel contiguously."""


class StageError(RollfolioError, RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage, message):
        super().__init__(f"stage '{stage}' failed: {message}")
        self.stage = stage
        self.message = message
