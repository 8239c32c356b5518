"""denoisebench: a deterministic benchmark harness for Gaussian color denoising.

The pieces compose left to right: planar float32 images (``image``),
reproducible degradation (``noise``), denoiser backends (``backends``),
the tiled-inference wrapper (``tiling``), geometric self-ensembling
(``ensemble``), fidelity metrics (``metrics``), and the evaluation harness
plus reporting (``harness``, ``report``). ``dataprep`` prepares training
corpora; ``cli`` exposes everything as subcommands.
"""

from ._kernels import ACTIVE as KERNEL_IMPL
from .backends import (Backend, DctBackend, ExternalBackend, GaussianBlurBackend,
                       IdentityBackend, NlmBackend, denoise, dct_threshold_denoise,
                       external_denoise, make_backend, nlm_denoise)
from .ensemble import ALL_ELEMENTS, FLIP_ELEMENTS, DihedralElement, apply, self_ensemble
from .harness import RunConfig, run_ablation_matrix, run_eval
from .image import (Image, Rect, crop, crop_to_multiple, load_png, load_raw_f32,
                    paste, save_png, save_raw_f32)
from .metrics import SsimParams, measure, psnr, ssim
from .noise import NoiseSpec, add_gaussian_noise, derive_stream, noisy_for_image
from .report import (AblationReport, EvalRecord, canonical_json, compare_runs,
                     loads_json, render_report)
from .tiling import TileSpec, tiled_denoise

__version__ = "0.1.0"

__all__ = [
    "Image", "Rect", "load_png", "save_png", "load_raw_f32", "save_raw_f32",
    "crop", "paste", "crop_to_multiple",
    "NoiseSpec", "derive_stream", "add_gaussian_noise", "noisy_for_image",
    "Backend", "IdentityBackend", "GaussianBlurBackend", "NlmBackend",
    "DctBackend", "ExternalBackend", "make_backend", "denoise",
    "nlm_denoise", "dct_threshold_denoise", "external_denoise",
    "DihedralElement", "ALL_ELEMENTS", "FLIP_ELEMENTS", "apply", "self_ensemble",
    "TileSpec", "tiled_denoise",
    "psnr", "ssim", "SsimParams", "measure",
    "RunConfig", "run_eval", "run_ablation_matrix",
    "AblationReport", "EvalRecord", "canonical_json", "compare_runs",
    "loads_json", "render_report",
    "KERNEL_IMPL", "__version__",
]
