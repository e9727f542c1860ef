"""Exception hierarchy shared by all modules."""


class ESGTError(Exception):
    """Base class for library errors."""


class InvalidProbability(ESGTError, ValueError):
    pass


class ConnectivityTimeout(ESGTError, RuntimeError):
    pass


class DimensionMismatch(ESGTError, ValueError):
    pass


class NoAnalyticGradient(ESGTError, ValueError):
    pass


class MaxIterations(ESGTError, RuntimeError):
    pass


class EmptyDimension(ESGTError, ValueError):
    pass


class PeriodTooShort(ESGTError, ValueError):
    pass


class DuplicateFrequency(ESGTError, ValueError):
    pass


class SumCollision(ESGTError, ValueError):
    pass


class PeriodOverflow(ESGTError, OverflowError):
    pass


class NonFinite(ESGTError, FloatingPointError):
    """A state entry became inf/nan. ``round`` is the round that produced it."""

    def __init__(self, message: str, round: int | None = None):
        super().__init__(message)
        self.round = round


class RoundError(ESGTError, RuntimeError):
    """Wraps an error raised inside ``run`` with the failing round index."""

    def __init__(self, round: int, cause: Exception):
        super().__init__(f"round {round}: {type(cause).__name__}: {cause}")
        self.round = round
        self.cause = cause
