"""Exception hierarchy.

Every error raised by the package derives from :class:`FaceVitalsError`, so
callers (the CLI and the HTTP service in particular) can catch one type and
map it to an exit code or status.
"""


class FaceVitalsError(Exception):
    """Base class for all package errors."""


# frame-model / pyramid
class EmptyRegion(FaceVitalsError, ValueError):
    pass


class TooSmall(FaceVitalsError, ValueError):
    pass


class DimensionMismatch(FaceVitalsError, ValueError):
    pass


class TooManyLevels(FaceVitalsError, ValueError):
    pass


# temporal / pulse
class NyquistViolation(FaceVitalsError, ValueError):
    pass


class TooShort(FaceVitalsError, ValueError):
    pass


class LevelOutOfRange(FaceVitalsError, IndexError):
    pass


class LengthMismatch(FaceVitalsError, ValueError):
    pass


class NonMonotonicTimestamp(FaceVitalsError, ValueError):
    pass


class NoInBandPeak(FaceVitalsError):
    pass


# facegate
class DegenerateRoi(FaceVitalsError, ValueError):
    pass


# fer
class ShapeMismatch(FaceVitalsError, ValueError):
    pass


class WrongInputSize(FaceVitalsError, ValueError):
    pass


class EmptyDataset(FaceVitalsError, ValueError):
    pass


class BadLabel(FaceVitalsError, ValueError):
    pass


class ModelFileError(FaceVitalsError):
    """Problem decoding a FERW weight file."""

    def __init__(self, message, layer=None):
        if layer is not None:
            message = f"layer {layer}: {message}"
        super().__init__(message)
        self.layer = layer


class BadMagic(ModelFileError):
    pass


class UnsupportedVersion(ModelFileError):
    pass


class TruncatedFile(ModelFileError):
    pass


class ChecksumMismatch(ModelFileError):
    pass


class ShapeCheckFailed(ModelFileError):
    pass


# rvid streams
class CorruptStream(FaceVitalsError, ValueError):
    pass


# stream-service
class UnknownSession(FaceVitalsError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class TooManySessions(FaceVitalsError):
    pass


class QueueFull(FaceVitalsError):
    pass


class MalformedBatch(FaceVitalsError, ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
