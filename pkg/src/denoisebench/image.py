"""Canonical image representation and bit-exact file I/O.

Pipeline images are planar float32 arrays of shape (channels, height, width),
channel-major and row-major within a channel, with a nominal [0,1] sample
range. Out-of-range values are legal intermediates (additive noise overshoots)
and are clamped only when exporting to PNG.

Two on-disk formats are supported:

* PNG, 8- or 16-bit, via OpenCV. Loading maps integer sample ``v`` to
  ``v / (2**depth - 1)`` in float32; saving clamps to [0,1] and quantizes with
  round-half-up. Alpha is discarded, grayscale is replicated to 3 channels.
* A raw float32 interchange format used by the external-backend protocol::

      magic  "DNB1"                      4 bytes
      width, height, channels            uint32 little-endian
      samples                            float32 little-endian, planar order

  The raw format round-trips bit-exactly, including NaN payloads.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import cv2
import numpy as np

RAW_MAGIC = b"DNB1"
_RAW_HEADER = struct.Struct("<4sIII")


class PngReadError(Exception):
    """File missing, unreadable, or not decodable as PNG."""


class PngDepthError(Exception):
    """PNG decoded to a sample type other than 8- or 16-bit unsigned."""


class RawFormatError(Exception):
    """Malformed raw float image file."""


class RawMagicError(RawFormatError):
    """Raw file does not start with the DNB1 magic."""


class RawTruncatedError(RawFormatError):
    """Raw file payload shorter than the header promises."""


@dataclass(frozen=True)
class Rect:
    """Axis-aligned pixel rectangle, origin top-left."""

    x0: int
    y0: int
    w: int
    h: int

    def __post_init__(self):
        if self.x0 < 0 or self.y0 < 0 or self.w < 1 or self.h < 1:
            raise ValueError(f"invalid rect {self}")


class Image:
    """Planar float32 raster. Treat as immutable except through :func:`paste`."""

    __slots__ = ("data",)

    def __init__(self, data: np.ndarray):
        data = np.ascontiguousarray(data, dtype=np.float32)
        if data.ndim != 3:
            raise ValueError(f"expected (channels, height, width), got shape {data.shape}")
        c, h, w = data.shape
        if c < 1 or h < 1 or w < 1:
            raise ValueError(f"empty image shape {data.shape}")
        self.data = data

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def copy(self) -> "Image":
        return Image(self.data.copy())

    def same_bits(self, other: "Image") -> bool:
        """Bit-exact equality (NaN-safe)."""
        return self.shape == other.shape and self.data.tobytes() == other.data.tobytes()

    @staticmethod
    def zeros(width: int, height: int, channels: int = 3) -> "Image":
        return Image(np.zeros((channels, height, width), dtype=np.float32))

    @staticmethod
    def full(width: int, height: int, value: float, channels: int = 3) -> "Image":
        return Image(np.full((channels, height, width), value, dtype=np.float32))

    @staticmethod
    def from_interleaved(hwc: np.ndarray) -> "Image":
        """Build from an (H, W, C) or (H, W) array."""
        if hwc.ndim == 2:
            hwc = hwc[:, :, None]
        return Image(np.ascontiguousarray(hwc.transpose(2, 0, 1)))

    def to_interleaved(self) -> np.ndarray:
        """Return an (H, W, C) float32 view copy."""
        return np.ascontiguousarray(self.data.transpose(1, 2, 0))

    def __repr__(self):
        return f"Image({self.width}x{self.height}x{self.channels})"


def load_png(path) -> Image:
    """Load an 8- or 16-bit PNG as a 3-channel (or 1-channel mask) image.

    Sample ``v`` maps to ``v/255`` (8-bit) or ``v/65535`` (16-bit) exactly in
    float32. Alpha channels are dropped; grayscale is replicated to RGB.
    """
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise PngReadError(f"cannot read image: {path}")
    if raw.dtype == np.uint8:
        scale = np.float32(255.0)
    elif raw.dtype == np.uint16:
        scale = np.float32(65535.0)
    else:
        raise PngDepthError(f"unsupported sample type {raw.dtype} in {path}")
    if raw.ndim == 2:
        rgb = np.repeat(raw[:, :, None], 3, axis=2)
    elif raw.shape[2] == 3:
        rgb = raw[:, :, ::-1]  # BGR -> RGB
    elif raw.shape[2] == 4:
        rgb = raw[:, :, 2::-1]  # BGRA -> RGB
    else:
        raise PngReadError(f"unsupported channel count {raw.shape[2]} in {path}")
    return Image.from_interleaved(rgb.astype(np.float32) / scale)


def png_bit_depth(path) -> int:
    """Bit depth recorded in the PNG IHDR chunk (byte 24 of the file)."""
    with open(path, "rb") as fh:
        head = fh.read(25)
    if len(head) < 25 or head[:8] != b"\x89PNG\r\n\x1a\n":
        raise PngReadError(f"not a PNG file: {path}")
    return head[24]


def quantize(data: np.ndarray, depth: int) -> np.ndarray:
    """Clamp to [0,1] and quantize round-half-up to ``2**depth - 1`` levels."""
    peak = float(2**depth - 1)
    q = np.floor(np.clip(data, 0.0, 1.0).astype(np.float64) * peak + 0.5)
    return q.astype(np.uint8 if depth == 8 else np.uint16)


def save_png(img: Image, path, depth: int = 8) -> None:
    """Write a PNG at the given depth. Deterministic bytes for a given input."""
    if depth not in (8, 16):
        raise ValueError(f"depth must be 8 or 16, got {depth}")
    if img.channels not in (1, 3):
        raise ValueError(f"PNG export needs 1 or 3 channels, got {img.channels}")
    q = quantize(img.to_interleaved(), depth)
    if img.channels == 1:
        q = q[:, :, 0]
    else:
        q = np.ascontiguousarray(q[:, :, ::-1])  # RGB -> BGR for the encoder
    ok, buf = cv2.imencode(".png", q)
    if not ok:
        raise RuntimeError(f"PNG encoding failed for {path}")
    with open(path, "wb") as fh:
        fh.write(buf.tobytes())


def save_raw_f32(img: Image, path) -> None:
    """Write the DNB1 raw float format (lossless, bit-exact)."""
    with open(path, "wb") as fh:
        fh.write(_RAW_HEADER.pack(RAW_MAGIC, img.width, img.height, img.channels))
        fh.write(img.data.astype("<f4", copy=False).tobytes())


def load_raw_f32(path) -> Image:
    """Read the DNB1 raw float format."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _RAW_HEADER.size:
        raise RawTruncatedError(f"file shorter than header: {path}")
    magic, w, h, c = _RAW_HEADER.unpack_from(blob)
    if magic != RAW_MAGIC:
        raise RawMagicError(f"bad magic {magic!r} in {path}")
    n = w * h * c
    payload = blob[_RAW_HEADER.size :]
    if len(payload) < 4 * n:
        raise RawTruncatedError(f"expected {4 * n} payload bytes, got {len(payload)} in {path}")
    data = np.frombuffer(payload[: 4 * n], dtype="<f4").reshape(c, h, w)
    return Image(data)


def crop(img: Image, rect: Rect) -> Image:
    """Extract a rectangle as a new image."""
    if rect.x0 + rect.w > img.width or rect.y0 + rect.h > img.height:
        raise ValueError(f"{rect} exceeds image {img.width}x{img.height}")
    return Image(img.data[:, rect.y0 : rect.y0 + rect.h, rect.x0 : rect.x0 + rect.w].copy())


def paste(dst: Image, src: Image, x0: int, y0: int) -> None:
    """Overwrite ``dst`` pixels with ``src`` at the given offset (last writer wins)."""
    if src.channels != dst.channels:
        raise ValueError("channel count mismatch")
    if x0 < 0 or y0 < 0 or x0 + src.width > dst.width or y0 + src.height > dst.height:
        raise ValueError(f"paste of {src.width}x{src.height} at ({x0},{y0}) "
                         f"exceeds {dst.width}x{dst.height}")
    dst.data[:, y0 : y0 + src.height, x0 : x0 + src.width] = src.data


def crop_to_multiple(img: Image, m: int) -> Image:
    """Top-left crop to the largest size with both dimensions divisible by ``m``.

    Identity data copy when already divisible.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    w = (img.width // m) * m
    h = (img.height // m) * m
    if w < 1 or h < 1:
        raise ValueError(f"image {img.width}x{img.height} smaller than multiple {m}")
    if w == img.width and h == img.height:
        return img.copy()
    return crop(img, Rect(0, 0, w, h))
