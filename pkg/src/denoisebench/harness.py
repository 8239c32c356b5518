"""Dataset evaluation and the 2x2 inference ablation matrix.

Per image the pipeline is: load clean PNG, crop to a size divisible by 8,
obtain the noisy input (synthesized from (seed, image_id) or loaded from a
paired directory), run the configured wrapper chain under the time/memory
probe, then score PSNR/SSIM against the clean image. Only the wrapper-chain
forward pass is timed; I/O and metrics are outside the probe.

Determinism: noise depends only on (seed, image_id), records are assembled
in fixed variant order and image-id lexicographic order, and aggregates use
exact summation, so for deterministic backends the canonical report bytes do
not depend on the worker count.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import _kernels
from .backends import Backend, IdentityBackend
from .config import digest_kv
from .ensemble import ALL_ELEMENTS, FLIP_ELEMENTS, self_ensemble
from .image import Image, crop_to_multiple, load_png, png_bit_depth, quantize
from .metrics import measure, psnr, ssim
from .noise import CLIP01, CLIP_NONE, NoiseSpec, noisy_for_image
from .report import AblationReport, EvalRecord, build_report
from .tiling import TileSpec, tiled_denoise

ENSEMBLE_MODES = ("off", "flips4", "full8")

_MEMORY_NOTE = ("peak_mem_mb is approximate process-level RSS/high-water-mark; "
                "accelerator memory of external backends is not tracked")
_TIMING_NOTE = "wall_ms covers the wrapper-chain forward only (no I/O, no metrics)"


class HarnessError(RuntimeError):
    pass


@dataclass
class RunConfig:
    """Everything a run needs; the digest covers protocol-relevant fields only.

    Exactly one noisy source is active: ``noisy_dir=None`` means noise is
    synthesized from ``(seed, image_id)``; otherwise noisy PNGs are loaded by
    matching filename from ``noisy_dir``. ``workers`` and output paths do not
    change results, so they are excluded from the digest and metadata.
    """

    clean_dir: Path
    noisy_dir: Path | None = None
    sigma: float = 50.0
    seed: int = 0
    clip_noise: bool = False
    backend: Backend = field(default_factory=IdentityBackend)
    ensemble_mode: str = "off"
    tile: TileSpec | None = None
    as_8bit: bool = False
    psnr_per_channel: bool = False
    workers: int = 1

    def __post_init__(self):
        self.clean_dir = Path(self.clean_dir)
        if self.noisy_dir is not None:
            self.noisy_dir = Path(self.noisy_dir)
        if self.ensemble_mode not in ENSEMBLE_MODES:
            raise HarnessError(f"ensemble mode must be one of {ENSEMBLE_MODES}")
        if self.workers < 1:
            raise HarnessError("workers must be >= 1")

    def validate_paths(self):
        if not self.clean_dir.is_dir():
            raise HarnessError(f"clean dir does not exist: {self.clean_dir}")
        if self.noisy_dir is not None and not self.noisy_dir.is_dir():
            raise HarnessError(f"noisy dir does not exist: {self.noisy_dir}")

    def noise_spec(self) -> NoiseSpec:
        return NoiseSpec(sigma_8bit=self.sigma, seed=self.seed,
                         clip_mode=CLIP01 if self.clip_noise else CLIP_NONE)

    def config_kv(self) -> dict[str, str]:
        return {
            "noise_mode": "paired" if self.noisy_dir is not None else "synthesize",
            "sigma_8bit": repr(float(self.sigma)),
            "seed": str(self.seed),
            "clip_noise": str(int(self.clip_noise)),
            "backend": self.backend.describe(),
            "ensemble": self.ensemble_mode,
            "tile": self.tile.describe() if self.tile else "off",
            "as_8bit": str(int(self.as_8bit)),
            "psnr_pooling": "per_channel_mean" if self.psnr_per_channel else "joint",
        }

    def digest(self) -> str:
        return digest_kv(self.config_kv())

    def meta(self) -> dict:
        meta = dict(self.config_kv())
        meta["kernel_impl"] = _kernels.ACTIVE
        meta["memory_note"] = _MEMORY_NOTE
        meta["timing_note"] = _TIMING_NOTE
        return meta


def list_images(directory: Path) -> list[tuple[str, Path]]:
    """(image_id, path) pairs, image-id = filename stem, lexicographic order."""
    pairs = sorted((p.stem, p) for p in Path(directory).iterdir()
                   if p.is_file() and p.suffix.lower() == ".png")
    if not pairs:
        raise HarnessError(f"no PNG images under {directory}")
    return pairs


def _ensemble_elements(mode: str):
    return {"off": None, "flips4": FLIP_ELEMENTS, "full8": ALL_ELEMENTS}[mode]


def build_pipeline(backend: Backend, ensemble_mode: str, tile: TileSpec | None):
    """Wrapper chain: backend, optionally tiled, optionally self-ensembled.

    The ensemble wraps the tiled function (transform the full input, run the
    whole tiled pass, invert), not the other way around.
    """
    if tile is not None:
        def inner(img: Image) -> Image:
            return tiled_denoise(backend, img, tile)
    else:
        inner = backend.denoise
    elements = _ensemble_elements(ensemble_mode)
    if elements is None:
        return inner

    def pipeline(img: Image) -> Image:
        return self_ensemble(inner, img, elements)

    return pipeline


def variant_name(ensemble_mode: str, tiled: bool) -> str:
    passes = {"off": "1pass", "flips4": "x4", "full8": "x8"}[ensemble_mode]
    return f"{'wrapped' if tiled else 'direct'}-{passes}"


def _metric_view(img: Image, as_8bit: bool) -> Image:
    if not as_8bit:
        return img
    return Image(quantize(img.data, 8).astype("float32") / 255.0)


def _digest_bytes(img: Image) -> str:
    return hashlib.sha256(img.data.tobytes()).hexdigest()[:16]


def _source_depth(path: Path) -> int:
    try:
        return png_bit_depth(path)
    except Exception:
        return 8


def _process_image(cfg: RunConfig, image_id: str, path: Path,
                   variants: list[tuple[str, object]]) -> list[EvalRecord]:
    clean = crop_to_multiple(load_png(path), 8)
    depth = _source_depth(path)
    if cfg.noisy_dir is not None:
        noisy_path = cfg.noisy_dir / path.name
        if not noisy_path.is_file():
            raise HarnessError(f"no paired noisy image for {path.name}")
        noisy = crop_to_multiple(load_png(noisy_path), 8)
        if noisy.shape != clean.shape:
            raise HarnessError(
                f"paired noisy shape {noisy.shape} != clean {clean.shape} for {path.name}")
    else:
        noisy = noisy_for_image(clean, cfg.noise_spec(), image_id)
    ndigest = _digest_bytes(noisy)
    ref = _metric_view(clean, cfg.as_8bit)
    records = []
    for name, pipeline in variants:
        res = measure(lambda p=pipeline: p(noisy))
        out = _metric_view(res.value, cfg.as_8bit)
        records.append(EvalRecord(
            image_id=image_id, variant=name,
            psnr_db=psnr(ref, out, per_channel=cfg.psnr_per_channel),
            ssim=ssim(ref, out),
            wall_ms=res.wall_ms, peak_mem_mb=res.peak_mem_mb,
            noise_digest=ndigest, source_depth=depth,
            width=clean.width, height=clean.height))
    return records


def _run(cfg: RunConfig, variants: list[tuple[str, object]],
         delta_pairs: list[tuple[str, str, str]] | None) -> AblationReport:
    cfg.validate_paths()
    images = list_images(cfg.clean_dir)
    results: dict[str, list[EvalRecord]] = {}
    failures: dict[str, str] = {}

    def work(item):
        image_id, path = item
        try:
            results[image_id] = _process_image(cfg, image_id, path, variants)
        except Exception as exc:
            failures[image_id] = f"{type(exc).__name__}: {exc}"

    if cfg.workers == 1:
        for item in images:
            work(item)
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            list(pool.map(work, images))

    names = [name for name, _ in variants]
    ordered = [rec
               for name in names
               for image_id, _ in images
               if image_id in results
               for rec in results[image_id] if rec.variant == name]
    failure_rows = [{"image_id": i, "error": failures[i]} for i in sorted(failures)]
    return build_report(ordered, failure_rows, cfg.digest(), cfg.meta(),
                        delta_pairs=delta_pairs, variants=names)


def run_eval(cfg: RunConfig) -> AblationReport:
    """Evaluate one configuration (a single variant) over a directory."""
    name = variant_name(cfg.ensemble_mode, cfg.tile is not None)
    variants = [(name, build_pipeline(cfg.backend, cfg.ensemble_mode, cfg.tile))]
    return _run(cfg, variants, delta_pairs=None)


def run_ablation_matrix(cfg: RunConfig, tile: TileSpec | None = None) -> AblationReport:
    """The 2x2 matrix {direct, wrapped} x {1-pass, ensembled}.

    Every variant sees the identical noisy realization per image (same record
    digest). The ensembled column uses ``cfg.ensemble_mode`` when set, else
    the full 8-element group; the wrapped column uses ``tile``, then
    ``cfg.tile``, then an 8-multiple window of 768.
    """
    ens = cfg.ensemble_mode if cfg.ensemble_mode != "off" else "full8"
    tspec = tile or cfg.tile or TileSpec(window=768)
    matrix = [("off", None), (ens, None), ("off", tspec), (ens, tspec)]
    variants = [(variant_name(mode, t is not None),
                 build_pipeline(cfg.backend, mode, t)) for mode, t in matrix]
    on = variant_name(ens, False).split("-")[1]
    delta_pairs = [
        (f"ensemble ({on}) @ direct", variant_name(ens, False), variant_name("off", False)),
        (f"ensemble ({on}) @ wrapped", variant_name(ens, True), variant_name("off", True)),
        ("wrapper @ 1pass", variant_name("off", True), variant_name("off", False)),
        (f"wrapper @ {on}", variant_name(ens, True), variant_name(ens, False)),
    ]
    # The digest/meta of a matrix run describe its fully wrapped leg.
    return _run(replace(cfg, ensemble_mode=ens, tile=tspec), variants, delta_pairs)


__all__ = ["RunConfig", "HarnessError", "run_eval", "run_ablation_matrix",
           "build_pipeline", "variant_name", "list_images", "ENSEMBLE_MODES"]
