"""Exception hierarchy. Every error carries a stable string code that the
HTTP layer forwards verbatim, so clients can match on codes instead of
messages."""


class MaskForgeError(Exception):
    code = "error"


# --- session / class registry ---

class NoImagesFoundError(MaskForgeError):
    code = "no-images-found"


class UnreadableDirectoryError(MaskForgeError):
    code = "unreadable-directory"


class DuplicateClassNameError(MaskForgeError):
    code = "duplicate-class-name"


class EmptyClassNameError(MaskForgeError):
    code = "empty-name"


class UnknownClassError(MaskForgeError):
    code = "unknown-class"


class UnknownSessionError(MaskForgeError):
    code = "unknown-session"


# --- geometry / ROI ---

class OutOfBoundsRoiError(MaskForgeError):
    code = "out-of-bounds-roi"


class ZeroAreaRoiError(MaskForgeError):
    code = "zero-area-roi"


class PointOutsideFrameError(MaskForgeError):
    code = "point-outside-frame"


class TooFewVerticesError(MaskForgeError):
    code = "too-few-vertices"


class MalformedGeometryError(MaskForgeError):
    code = "malformed-geometry"


class DimensionMismatchError(MaskForgeError):
    code = "dimension-mismatch"


# --- superpixels ---

class InvalidParamsError(MaskForgeError):
    code = "invalid-params"


class PointOutsideImageError(MaskForgeError):
    code = "point-outside-image"


class StaleSuperpixelMapError(MaskForgeError):
    code = "stale-superpixel-map"


# --- persistence ---

class UnsupportedFormatError(MaskForgeError):
    code = "unsupported-format"


class CorruptFileError(MaskForgeError):
    code = "corrupt-file"


class NotFoundError(MaskForgeError):
    code = "not-found"


class IoFailureError(MaskForgeError):
    code = "io-failure"


class UnencodableClassNameError(MaskForgeError):
    code = "unencodable-class-name"


class CorruptCheckpointError(MaskForgeError):
    code = "corrupt-checkpoint"
