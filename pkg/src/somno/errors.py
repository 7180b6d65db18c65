"""Exception hierarchy shared across the package."""


class SomnoError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(SomnoError, ValueError):
    """Array shapes are inconsistent with the operation."""


class DegenerateBatchError(SomnoError, ValueError):
    """Batch statistics are undefined (fewer than two entries per channel)."""


class LabelError(SomnoError, ValueError):
    """A class label is outside the valid range."""


class StateError(SomnoError, RuntimeError):
    """An operation was called without the state it depends on."""


class DataError(SomnoError, ValueError):
    """Input data is empty or semantically invalid."""


class FormatError(DataError):
    """A file does not match its binary or text layout.

    ``offset`` is the byte offset (binary files) or 1-based line number
    (text files) where the problem was detected, when known.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at {offset})"
        super().__init__(message)
        self.offset = offset
