"""Tiled inference wrapper for memory-bounded full-image denoising.

Images wider or taller than the tile window are processed as overlapping
tiles whose denoised results are blended back together. When the window
covers the whole image the wrapper degenerates to a single direct pass and
returns a bit-identical result, so "wrapped" and "direct" differ only when
tiling actually happens.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import Image, Rect, crop

BLEND_UNIFORM = "uniform"
BLEND_HANN = "hann"
_BLENDS = (BLEND_UNIFORM, BLEND_HANN)

# Hann edge weights go to zero; floor them so every pixel keeps support.
_WEIGHT_FLOOR = 1e-3


class TileError(RuntimeError):
    """Backend failure inside one tile; carries the tile rectangle."""

    def __init__(self, rect: Rect, cause: BaseException | str):
        super().__init__(f"tile {rect}: {cause}")
        self.rect = rect


@dataclass(frozen=True)
class TileSpec:
    """Tile geometry: square window, overlap between neighbors, blend mode."""

    window: int
    overlap: int = 0
    blend: str = BLEND_UNIFORM

    def __post_init__(self):
        if self.window <= 0 or self.window % 8 != 0:
            raise ValueError(f"tile window must be a positive multiple of 8, got {self.window}")
        if not 0 <= self.overlap < self.window:
            raise ValueError(f"overlap must be in [0, window), got {self.overlap}")
        if self.blend not in _BLENDS:
            raise ValueError(f"blend must be one of {_BLENDS}, got {self.blend!r}")

    def describe(self) -> str:
        return f"window={self.window},overlap={self.overlap},blend={self.blend}"


def _positions(extent: int, window: int, stride: int) -> list[int]:
    # Tiles start every `stride` pixels; the last tile is end-aligned so the
    # image is covered exactly, which may shrink its step below the stride.
    if window >= extent:
        return [0]
    pos = list(range(0, extent - window + 1, stride))
    if pos[-1] != extent - window:
        pos.append(extent - window)
    return pos


def tile_rects(width: int, height: int, spec: TileSpec) -> list[Rect]:
    """Tile rectangles in row-major order. Tiles are clipped to the image."""
    stride = spec.window - spec.overlap
    tw = min(spec.window, width)
    th = min(spec.window, height)
    xs = _positions(width, tw, stride)
    ys = _positions(height, th, stride)
    return [Rect(x, y, tw, th) for y in ys for x in xs]


def tile_weight(tw: int, th: int, blend: str) -> np.ndarray:
    """Per-tile blend weight plane, shape (th, tw), float64, all > 0."""
    if blend == BLEND_UNIFORM:
        return np.ones((th, tw), dtype=np.float64)
    wy = np.maximum(np.hanning(th) if th > 1 else np.ones(1), _WEIGHT_FLOOR)
    wx = np.maximum(np.hanning(tw) if tw > 1 else np.ones(1), _WEIGHT_FLOOR)
    return np.outer(wy, wx)


def blend_weight_sums(width: int, height: int, spec: TileSpec) -> np.ndarray:
    """Accumulated blend weight per pixel over all tiles (the denominator)."""
    den = np.zeros((height, width), dtype=np.float64)
    for r in tile_rects(width, height, spec):
        den[r.y0:r.y0 + r.h, r.x0:r.x0 + r.w] += tile_weight(r.w, r.h, spec.blend)
    return den


def tiled_denoise(b, x: Image, spec: TileSpec) -> Image:
    """Denoise ``x`` tile by tile with backend ``b`` and blend the results.

    ``b`` may be a backend object or a plain ``Image -> Image`` callable.
    Tiles are processed sequentially in row-major order; accumulation is in
    float64, so the result does not depend on how tiles would be scheduled.
    """
    fn = b.denoise if hasattr(b, "denoise") else b
    if spec.window >= max(x.width, x.height):
        out = fn(x)
        if out.shape != x.shape:
            raise TileError(Rect(0, 0, x.width, x.height),
                            f"backend returned shape {out.shape} for input {x.shape}")
        return out
    num = np.zeros(x.shape, dtype=np.float64)
    den = np.zeros((x.height, x.width), dtype=np.float64)
    for r in tile_rects(x.width, x.height, spec):
        try:
            out = fn(crop(x, r))
        except Exception as exc:
            raise TileError(r, exc) from exc
        if out.shape != (x.channels, r.h, r.w):
            raise TileError(r, f"backend returned shape {out.shape} for tile {(x.channels, r.h, r.w)}")
        w = tile_weight(r.w, r.h, spec.blend)
        num[:, r.y0:r.y0 + r.h, r.x0:r.x0 + r.w] += w * out.data.astype(np.float64)
        den[r.y0:r.y0 + r.h, r.x0:r.x0 + r.w] += w
    return Image((num / den).astype(np.float32))


__all__ = ["TileSpec", "TileError", "tile_rects", "tile_weight",
           "blend_weight_sums", "tiled_denoise", "BLEND_UNIFORM", "BLEND_HANN"]
