"""Exception types shared across the package."""


class AffectLoopError(Exception):
    """Base class for all package errors."""


class ParseError(AffectLoopError):
    """A wire record could not be decoded at all."""


class SchemaError(AffectLoopError):
    """A record decoded but is missing or mistyping a required field."""


class RangeError(AffectLoopError):
    """A field value is outside its physiological bounds."""

    def __init__(self, field, message):
        super().__init__(message)
        self.field = field


class OrderingError(AffectLoopError):
    """Timestamps went backwards where monotone order is required."""


class SessionError(AffectLoopError):
    """A sample or request referenced an unknown session or student."""


class InsufficientDataError(AffectLoopError):
    """Not enough samples in the window to compute a statistic."""


class WarmupError(InsufficientDataError):
    """A channel has not accumulated enough samples yet; names the channel."""

    def __init__(self, channel, message=None):
        super().__init__(message or f"channel {channel!r} is still warming up")
        self.channel = channel


class CalibrationRequiredError(AffectLoopError):
    """Normalization was requested before the student was calibrated."""


class ConvergenceError(AffectLoopError):
    """An iterative solver failed to reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class PersistenceError(AffectLoopError):
    """A stored session artifact is missing or corrupt."""

    def __init__(self, message, path=None, byte_offset=None):
        super().__init__(message)
        self.path = path
        self.byte_offset = byte_offset
