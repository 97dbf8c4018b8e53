"""Image buffers, sRGB conversion, file decode/encode, classical style noise,
and content-patch compositing.

All in-memory pixel data is linear light, float32, shaped (H, W, C) with C in
{1, 3}. sRGB happens only at file boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from .errors import CorruptImageError, ImageError, UnsupportedFormatError

SUPPORTED_FORMATS = ("PNG", "JPEG")


@dataclass(frozen=True)
class ImageBuffer:
    """Linear-light image, float32, (H, W, C) with 1 or 3 channels."""

    data: np.ndarray

    def __post_init__(self):
        d = self.data
        if d.ndim != 3 or d.shape[2] not in (1, 3):
            raise ImageError(f"image data must be (H, W, 1|3), got {d.shape}")
        if d.shape[0] < 1 or d.shape[1] < 1:
            raise ImageError("zero-dimension image")
        if d.dtype != np.float32:
            raise ImageError(f"image data must be float32, got {d.dtype}")
        if not np.all(np.isfinite(d)):
            raise ImageError("image data contains non-finite values")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def as_rgb(self) -> "ImageBuffer":
        if self.channels == 3:
            return self
        return ImageBuffer(np.repeat(self.data, 3, axis=2))


def constant_image(width: int, height: int, rgb) -> ImageBuffer:
    """Uniform-color linear RGB image."""
    data = np.empty((height, width, 3), dtype=np.float32)
    data[:] = np.asarray(rgb, dtype=np.float32)
    return ImageBuffer(data)


# --- sRGB transfer ----------------------------------------------------------

def srgb_to_linear(x):
    """IEC 61966-2-1 decode, elementwise; input in [0, 1]."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x <= 0.04045, x / 12.92, ((x + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(x):
    """IEC 61966-2-1 encode, elementwise; input in [0, 1]."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x <= 0.0031308, x * 12.92, 1.055 * np.maximum(x, 0.0) ** (1 / 2.4) - 0.055)


_DECODE_LUT = srgb_to_linear(np.arange(256) / 255.0).astype(np.float32)


def encode_srgb8(linear: np.ndarray) -> np.ndarray:
    """Linear float image -> 8-bit sRGB, clipping to [0, 1] first."""
    clipped = np.clip(linear, 0.0, 1.0)
    return np.rint(linear_to_srgb(clipped) * 255.0).astype(np.uint8)


# --- file I/O ----------------------------------------------------------------

def load_image(path) -> ImageBuffer:
    """Decode a PNG or JPEG file into a linear-light buffer.

    8-bit sRGB channels are decoded through a lookup table; grayscale files
    stay single-channel, everything else becomes RGB.
    """
    path = Path(path)
    try:
        with Image.open(path) as im:
            fmt = im.format
            if fmt not in SUPPORTED_FORMATS:
                raise UnsupportedFormatError(f"{path}: unsupported format {fmt!r}")
            if im.width == 0 or im.height == 0:
                raise CorruptImageError(f"{path}: zero-dimension image")
            mode = "L" if im.mode in ("1", "L", "I;16", "I") else "RGB"
            arr = np.asarray(im.convert(mode))
    except UnidentifiedImageError as exc:
        raise CorruptImageError(f"{path}: cannot decode ({exc})") from exc
    except OSError as exc:
        raise CorruptImageError(f"{path}: cannot decode ({exc})") from exc
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return ImageBuffer(_DECODE_LUT[arr])


def write_png8(path, data: np.ndarray) -> None:
    """Write uint8 data — (H, W) grayscale, (H, W, 3) RGB, or paletted via PIL."""
    if data.dtype != np.uint8:
        raise ImageError("write_png8 expects uint8 data")
    Image.fromarray(data).save(Path(path), format="PNG")


def write_png16(path, data: np.ndarray) -> None:
    """Write a 16-bit grayscale PNG (optional packed-depth convenience)."""
    if data.dtype != np.uint16 or data.ndim != 2:
        raise ImageError("write_png16 expects uint16 (H, W) data")
    img = Image.new("I;16", (data.shape[1], data.shape[0]))
    img.frombytes(np.ascontiguousarray(data).tobytes())
    img.save(Path(path), format="PNG")


# --- classical style noise ---------------------------------------------------

def gaussian_noise(img: ImageBuffer, sigma: float, rng: np.random.Generator) -> ImageBuffer:
    """Add i.i.d. zero-mean Gaussian noise and clamp to [0, 1]."""
    if sigma < 0:
        raise ImageError("sigma must be >= 0")
    if sigma == 0:
        return ImageBuffer(img.data.copy())
    noise = rng.normal(0.0, sigma, size=img.data.shape)
    out = np.clip(img.data.astype(np.float64) + noise, 0.0, 1.0)
    return ImageBuffer(out.astype(np.float32))


def morphology(img: ImageBuffer, op: str, radius: int) -> ImageBuffer:
    """Min (erode) or max (dilate) filter over a (2r+1)^2 window, edge-clamped.

    Multi-channel images are filtered per channel.
    """
    if radius < 1:
        raise ImageError("radius must be >= 1")
    if op == "erode":
        filt = ndimage.minimum_filter
    elif op == "dilate":
        filt = ndimage.maximum_filter
    else:
        raise ImageError(f"unknown morphology op {op!r}")
    size = 2 * radius + 1
    out = np.empty_like(img.data)
    for c in range(img.channels):
        out[:, :, c] = filt(img.data[:, :, c], size=size, mode="nearest")
    return ImageBuffer(out)


# --- patch compositing -------------------------------------------------------

def _resample_bilinear(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample of (H, W, C); identity when sizes already match."""
    in_h, in_w = src.shape[:2]
    if (in_h, in_w) == (out_h, out_w):
        return src.copy()
    ys = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    grid = np.meshgrid(ys, xs, indexing="ij")
    out = np.empty((out_h, out_w, src.shape[2]), dtype=np.float32)
    for c in range(src.shape[2]):
        out[:, :, c] = ndimage.map_coordinates(src[:, :, c], grid, order=1, mode="nearest")
    return out


def stamp_patch(doc: ImageBuffer, patch: ImageBuffer, uv_rect, alpha: ImageBuffer | None = None,
                name: str = "patch"):
    """Composite a content patch into the document texture at uv_rect.

    uv_rect is (u0, v0, u1, v1) in document UV coordinates (v up, so v=1 is
    the top texture row). The patch is bilinearly resampled to the pixel rect
    and alpha-composited; alpha is a single-channel buffer, or None for an
    opaque stamp. Returns the modified texture and a FieldAnnotation that
    registers the stamped region as ground truth.
    """
    from .scene import FieldAnnotation  # deferred: scene type-checks against ImageBuffer

    u0, v0, u1, v1 = uv_rect
    if not (0 <= u0 < u1 <= 1 and 0 <= v0 < v1 <= 1):
        raise ImageError(f"invalid uv_rect {uv_rect}")
    w, h = doc.width, doc.height
    x0, x1 = int(round(u0 * w)), int(round(u1 * w))
    y0, y1 = int(round((1 - v1) * h)), int(round((1 - v0) * h))
    if x1 <= x0 or y1 <= y0:
        raise ImageError(f"uv_rect {uv_rect} maps to a zero-area pixel region")

    doc_rgb = doc.as_rgb()
    patch_rgb = _resample_bilinear(patch.as_rgb().data, y1 - y0, x1 - x0)
    if alpha is None:
        a = np.ones((y1 - y0, x1 - x0, 1), dtype=np.float32)
    else:
        if alpha.channels != 1:
            raise ImageError("alpha must be single-channel")
        a = np.clip(_resample_bilinear(alpha.data, y1 - y0, x1 - x0), 0.0, 1.0)

    out = doc_rgb.data.copy()
    region = out[y0:y1, x0:x1, :]
    out[y0:y1, x0:x1, :] = region * (1.0 - a) + patch_rgb * a
    return ImageBuffer(out), FieldAnnotation(name=name, uv_rect=(u0, v0, u1, v1))
