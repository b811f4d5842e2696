"""Exception types shared across the package."""


class TraceLabError(Exception):
    """Base class for all package errors."""


class OutsideDomain(TraceLabError):
    """A point was evaluated outside the field's domain of definition."""


class OnNullSet(TraceLabError):
    """A field was evaluated exactly on its declared null set."""


class BadRegion(TraceLabError):
    """An integration region has zero volume or inconsistent data."""


class TolNotReached(TraceLabError):
    """The evaluation budget ran out before the requested tolerance.

    Carries the best estimate so callers can still inspect it.
    """

    def __init__(self, value, error_bound, message=""):
        self.value = value
        self.error_bound = error_bound
        super().__init__(
            message or f"budget exhausted: value={value!r}, error_bound={error_bound!r}"
        )


class TooFewSamples(TraceLabError):
    """A radius schedule is too short for limit classification."""


class LevelMismatch(TraceLabError):
    """A dyadic pattern has the wrong level for the requested slab move."""


class OutsideSlab(TraceLabError):
    """A slab field was evaluated at a time outside its slab."""


class TimeOutOfRange(TraceLabError):
    """A weak solution was evaluated outside its time interval."""


class ConfigError(TraceLabError):
    """An experiment configuration failed validation."""
