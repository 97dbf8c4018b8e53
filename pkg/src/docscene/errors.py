"""Exception hierarchy shared across the package."""


class DocSceneError(Exception):
    """Base class for all errors raised by docscene."""


# --- randomization spec ---------------------------------------------------

class SpecError(DocSceneError):
    """Invalid randomization spec document."""


class SpecSyntaxError(SpecError):
    """Spec text failed to parse; carries the source position when known."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class UnknownParameterError(SpecError):
    """A params entry refers to a path that is not a known scene parameter."""


class DuplicatePathError(SpecError):
    """The same parameter path is bound more than once."""


class RangeOrderError(SpecError):
    """A continuous range has min > max."""


class RangeDomainError(SpecError):
    """A continuous range reaches outside the parameter's allowed domain."""


class WeightError(SpecError):
    """A categorical weight is missing, zero, or negative."""


class UnknownChoiceError(SpecError):
    """A categorical entry names a value the parameter does not accept."""


# --- images ---------------------------------------------------------------

class ImageError(DocSceneError):
    """Problem decoding, encoding, or transforming an image."""


class UnsupportedFormatError(ImageError):
    """File is not one of the supported raster formats."""


class CorruptImageError(ImageError):
    """File exists but cannot be decoded."""


# --- geometry and labels ---------------------------------------------------

class GeometryError(DocSceneError):
    """Invalid geometric input to a scene or label operation."""


class NonPlanarSheetError(GeometryError):
    """Operation requires a planar sheet but the mesh is not planar."""


class PointBehindCameraError(GeometryError):
    """Projection requested for a point at or behind the camera plane."""


class DegenerateCameraError(GeometryError):
    """Camera basis is not usable (zero-length or non-orthonormal axes)."""


class DegenerateHomographyError(GeometryError):
    """Document-to-image homography is singular for this pose."""


class EdgeOnViewError(GeometryError):
    """Rotation label undefined: the document's up axis projects to ~zero length."""


# --- rendering and output ---------------------------------------------------

class RenderError(DocSceneError):
    """Renderer could not produce passes for a scene."""


class ManifestError(DocSceneError):
    """Dataset manifest is malformed or inconsistent."""
