"""Exception hierarchy for the shift monitoring engine."""


class ShiftWatchError(Exception):
    """Base class for all engine errors."""


class MalformedImageError(ShiftWatchError, ValueError):
    pass


class DimensionError(ShiftWatchError, ValueError):
    pass


class DegenerateConfigurationError(ShiftWatchError, ValueError):
    """Landmarks collapse to a point, so no similarity can be estimated."""


class DegenerateVectorError(ShiftWatchError, ValueError):
    pass


class InvalidEmbeddingError(ShiftWatchError, ValueError):
    pass


class AlreadyEnrolledError(ShiftWatchError, KeyError):
    def __str__(self) -> str:
        return f"operator {self.args[0]!r} is already enrolled"


class CorruptGalleryError(ShiftWatchError):
    def __init__(self, message: str, record: str | int | None = None):
        super().__init__(message if record is None else f"record {record!r}: {message}")
        self.record = record


class OutOfOrderError(ShiftWatchError, ValueError):
    """Timestamp went backwards in a feed that must be monotone."""


class InvalidClockError(ShiftWatchError, ValueError):
    pass


class ModelFormatError(ShiftWatchError, ValueError):
    pass


class ConfigError(ShiftWatchError):
    pass


class SourceError(ShiftWatchError):
    pass


class WebhookConfigError(ConfigError):
    """The alert endpoint rejected the request with a 4xx status."""

    def __init__(self, status: int, url: str):
        super().__init__(f"webhook {url} rejected alert with HTTP {status}")
        self.status = status
        self.url = url


class UsageError(ShiftWatchError, ValueError):
    pass
