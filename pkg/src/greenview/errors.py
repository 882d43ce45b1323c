"""Exception hierarchy shared by all greenview modules."""


class GreenViewError(Exception):
    """Base class for every error raised by this package."""


# --- imaging ---

class UnreadableFile(GreenViewError):
    pass


class UnsupportedFormat(GreenViewError):
    pass


class CorruptImage(GreenViewError):
    pass


class NotALabelImage(GreenViewError):
    pass


class NonBinaryMask(GreenViewError):
    pass


# --- gvi ---

class EmptyMask(GreenViewError):
    pass


class EmptyAggregate(GreenViewError):
    pass


class MixedScope(GreenViewError):
    pass


# --- metrics ---

class DimensionMismatch(GreenViewError):
    pass


class MissingMask(GreenViewError):
    pass


class EmptyInput(GreenViewError):
    pass


class ZeroVariance(GreenViewError):
    pass


class InvalidQuantile(GreenViewError):
    pass


# --- dataset ---

class DuplicateId(GreenViewError):
    pass


class MalformedRow(GreenViewError):
    def __init__(self, row_number, message):
        super().__init__(f"row {row_number}: {message}")
        self.row_number = row_number


class MissingColumn(GreenViewError):
    pass


class SizeMismatch(GreenViewError):
    pass


class OrphanLabel(GreenViewError):
    pass


# --- inference ---

class BackendFailure(GreenViewError):
    pass


class ShapeMismatch(GreenViewError):
    pass


class IncompatibleModel(GreenViewError):
    pass


class MissingMaskFile(GreenViewError):
    pass


# --- geo ---

class EmptyNetwork(GreenViewError):
    pass


class NotEnoughPoints(GreenViewError):
    pass


class QuotaExceeded(GreenViewError):
    pass


class NoImageryAtPoint(GreenViewError):
    pass


class TransportError(GreenViewError):
    """Retryable transport-level failure (connection reset, 5xx, timeout)."""
