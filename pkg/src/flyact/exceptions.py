"""Exception hierarchy.

``DataError`` covers bad or missing inputs (CLI exit code 2) and
``NumericError`` covers numerical breakdowns (CLI exit code 3). Both
subclass ``ValueError`` so sklearn-style callers can catch them generically.
"""


class FlyactError(Exception):
    """Base class for all package errors."""


class DataError(FlyactError, ValueError):
    pass


class NumericError(FlyactError, ValueError):
    pass


# video-io
class EmptyDirectory(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class UnsupportedFormat(DataError):
    pass


class OutOfRange(DataError):
    pass


class ParseError(DataError):
    def __init__(self, row, message):
        self.row = row
        super().__init__(f"row {row}: {message}")


class DuplicateClipId(DataError):
    pass


class InsufficientSamples(DataError):
    def __init__(self, label, available, required):
        self.label = label
        super().__init__(
            f"class {label!r} has {available} entries, needs more than {required}"
        )


class BadDimensions(DataError):
    pass


# detector
class FrameTooSmall(DataError):
    pass


class TooFewFrames(DataError):
    pass


class BadBlockSize(DataError):
    pass


# descriptor
class VolumeTooSmall(DataError):
    pass


class DegenerateBin(DataError):
    pass


class SupportOutOfBounds(DataError):
    pass


class LowContrast(DataError):
    pass


# signature
class NoFeatures(DataError):
    pass


# srkda / classify
class NonFiniteInput(DataError):
    pass


class DegenerateData(DataError):
    pass


class MissingClass(DataError):
    pass


class OracleTooLarge(DataError):
    pass


class EmptyTestSet(DataError):
    pass


class FactorizationFailure(NumericError):
    pass


# persistence
class VersionMismatch(DataError):
    pass


class CorruptFile(DataError):
    pass
