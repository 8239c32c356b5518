"""Training-corpus preparation: sub-image tiling and patch sampling plans.

Very large source images are split offline into near-target-size tiles so
training never decodes 8K files. Patch sampling produces a deterministic plan
(which tile, which square, which size) from a seed; it never touches pixels,
so plans are cheap to generate and audit.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

from .image import Rect, crop, load_png, png_bit_depth, save_png
from .noise import derive_stream

log = logging.getLogger(__name__)

_IMAGE_EXTS = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}


class DataprepError(RuntimeError):
    pass


@dataclass(frozen=True)
class StageConfig:
    """One training stage: corpus sources and a patch-size schedule.

    The schedule is a tuple of ``(patch_size, batch_size)`` phases of equal
    iteration share. Patch sizes must be multiples of 8 and strictly
    increasing across phases.
    """

    stage: str
    sources: tuple[str, ...]
    patch_schedule: tuple[tuple[int, int], ...]
    iterations: int
    initial_lr: float

    def __post_init__(self):
        if not self.patch_schedule:
            raise ValueError("patch schedule must not be empty")
        sizes = [p for p, _ in self.patch_schedule]
        for p, bs in self.patch_schedule:
            if p % 8 != 0 or p <= 0:
                raise ValueError(f"patch size {p} must be a positive multiple of 8")
            if bs < 1:
                raise ValueError(f"batch size {bs} must be >= 1")
        if sizes != sorted(set(sizes)):
            raise ValueError(f"patch sizes must be strictly increasing, got {sizes}")
        if self.iterations <= 0 or self.initial_lr <= 0:
            raise ValueError("iterations and initial_lr must be positive")

    @property
    def max_patch(self) -> int:
        return max(p for p, _ in self.patch_schedule)

    def phase_for_draw(self, i: int, n: int) -> tuple[int, int]:
        """Schedule phase for draw ``i`` of ``n`` (equal shares, in order)."""
        if not 0 <= i < n:
            raise ValueError(f"draw index {i} out of range for {n} draws")
        return self.patch_schedule[i * len(self.patch_schedule) // n]

    def to_kv(self) -> dict[str, str]:
        return {
            "stage": self.stage,
            "sources": ",".join(self.sources),
            "patch_schedule": ",".join(f"{p}x{b}" for p, b in self.patch_schedule),
            "iterations": str(self.iterations),
            "initial_lr": repr(self.initial_lr),
        }

    @classmethod
    def from_kv(cls, kv: dict[str, str]) -> "StageConfig":
        sched = tuple(tuple(int(t) for t in item.split("x"))
                      for item in kv["patch_schedule"].split(","))
        return cls(stage=kv["stage"],
                   sources=tuple(s for s in kv["sources"].split(",") if s),
                   patch_schedule=sched,
                   iterations=int(kv["iterations"]),
                   initial_lr=float(kv["initial_lr"]))


def default_stage_configs() -> tuple[StageConfig, StageConfig]:
    """The two-stage progressive training recipe."""
    stage1 = StageConfig(
        stage="I",
        sources=("DIV2K", "Flickr2K", "OST", "LSDIR"),
        patch_schedule=((256, 4), (448, 2), (768, 1)),
        iterations=300_000,
        initial_lr=1e-4,
    )
    stage2 = StageConfig(
        stage="II",
        sources=("DIV2K", "Flickr2K", "OST", "LSDIR", "LIU4K-v2", "NKUSR8K", "DIV8K"),
        patch_schedule=((768, 4),),
        iterations=300_000,
        initial_lr=1e-5,
    )
    return stage1, stage2


def split_extent(extent: int, target: int) -> list[int]:
    """Cut points 0 = b_0 < ... < b_n = extent into near-equal spans.

    ``n = ceil(extent / target)`` spans whose lengths differ by at most one
    pixel; ``b_i = ceil(i * extent / n)``.
    """
    if extent < 1 or target < 1:
        raise ValueError("extent and target must be >= 1")
    n = math.ceil(extent / target)
    return [(i * extent + n - 1) // n for i in range(n + 1)]


def grid_rects(width: int, height: int, target: int) -> list[tuple[int, int, Rect]]:
    """Row-major ``(row, col, rect)`` grid covering the image exactly."""
    xs = split_extent(width, target)
    ys = split_extent(height, target)
    out = []
    for r in range(len(ys) - 1):
        for c in range(len(xs) - 1):
            out.append((r, c, Rect(xs[c], ys[r], xs[c + 1] - xs[c], ys[r + 1] - ys[r])))
    return out


def write_manifest(entries: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")


def read_manifest(path) -> list[dict]:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                entries.append(json.loads(line))
    return entries


def make_subimages(src_dir, dst_dir, target_long_side: int = 2048,
                   min_side: int = 256) -> list[dict]:
    """Split every image under ``src_dir`` into a near-equal grid of tiles.

    Tiles smaller than ``min_side`` on either axis are discarded. PNG sources
    keep their bit depth; other formats are written as 8-bit PNG. Writes
    ``manifest.jsonl`` into ``dst_dir`` and returns its entries (tile entries,
    one error entry per unreadable source, and a trailing summary).
    """
    src_dir = Path(src_dir)
    dst_dir = Path(dst_dir)
    dst_dir.mkdir(parents=True, exist_ok=True)
    files = sorted(p for p in src_dir.iterdir()
                   if p.is_file() and p.suffix.lower() in _IMAGE_EXTS)
    if not files:
        raise DataprepError(f"no images found under {src_dir}")
    entries: list[dict] = []
    n_tiles = n_errors = n_discarded = 0
    for path in files:
        try:
            img = load_png(path)
            depth = png_bit_depth(path) if path.suffix.lower() == ".png" else 8
        except Exception as exc:
            entries.append({"type": "error", "source": path.name, "error": str(exc)})
            n_errors += 1
            continue
        for row, col, rect in grid_rects(img.width, img.height, target_long_side):
            if min(rect.w, rect.h) < min_side:
                n_discarded += 1
                continue
            out_name = f"{path.stem}_r{row}c{col}.png"
            save_png(crop(img, rect), dst_dir / out_name, depth=depth)
            entries.append({"type": "tile", "source": path.name, "out": out_name,
                            "rect": [rect.x0, rect.y0, rect.w, rect.h],
                            "width": rect.w, "height": rect.h, "depth": depth})
            n_tiles += 1
    entries.append({"type": "summary", "sources": len(files), "tiles": n_tiles,
                    "errors": n_errors, "discarded": n_discarded})
    write_manifest(entries, dst_dir / "manifest.jsonl")
    return entries


@dataclass(frozen=True)
class PatchSample:
    draw: int
    tile: str
    rect: Rect
    patch_size: int
    batch_size: int

    def to_dict(self) -> dict:
        return {"draw": self.draw, "tile": self.tile,
                "rect": [self.rect.x0, self.rect.y0, self.rect.w, self.rect.h],
                "patch_size": self.patch_size, "batch_size": self.batch_size}


def _bounded(u: int, n: int) -> int:
    # Multiply-shift map of a 64-bit uniform onto [0, n); bias is O(n / 2^64).
    return (u * n) >> 64


def sample_patches(entries: list[dict], cfg: StageConfig, seed: int, n: int) -> list[PatchSample]:
    """Deterministic patch-sampling plan: ``n`` draws from the tile manifest.

    Draw ``i`` uses the schedule phase ``cfg.phase_for_draw(i, n)`` and its own
    counter-based stream derived from ``(seed, "draw:i")``, so any draw can be
    regenerated in isolation. Only tiles at least as large as the stage's
    largest patch on both axes are eligible; smaller ones are filtered up
    front (logged once with a count).
    """
    if n < 1:
        raise ValueError("need at least one draw")
    tiles = [e for e in entries if e.get("type") == "tile"]
    eligible = sorted((e for e in tiles
                       if min(e["width"], e["height"]) >= cfg.max_patch),
                      key=lambda e: e["out"])
    dropped = len(tiles) - len(eligible)
    if dropped:
        log.warning("ignoring %d tile(s) smaller than the %dpx stage patch",
                    dropped, cfg.max_patch)
    if not eligible:
        raise DataprepError(
            f"no tile is >= {cfg.max_patch}px on both axes; cannot sample stage {cfg.stage}")
    samples = []
    for i in range(n):
        patch, batch = cfg.phase_for_draw(i, n)
        stream = derive_stream(seed, f"draw:{i}")
        u = [int(v) for v in stream.raw(3)]
        tile = eligible[_bounded(u[0], len(eligible))]
        ox = _bounded(u[1], tile["width"] - patch + 1)
        oy = _bounded(u[2], tile["height"] - patch + 1)
        samples.append(PatchSample(draw=i, tile=tile["out"],
                                   rect=Rect(ox, oy, patch, patch),
                                   patch_size=patch, batch_size=batch))
    return samples


__all__ = ["StageConfig", "default_stage_configs", "split_extent", "grid_rects",
           "make_subimages", "sample_patches", "PatchSample", "DataprepError",
           "write_manifest", "read_manifest"]
