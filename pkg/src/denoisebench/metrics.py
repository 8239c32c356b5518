"""Fidelity metrics (PSNR, SSIM) and a wall-time / peak-memory probe.

PSNR pools the squared error jointly over all channels and pixels (one MSE
for the whole image) and is computed with exact summation, so the value is
invariant under any reordering of pixels, including the eight dihedral
transforms. A per-channel-mean variant exists behind a flag for matching
protocols that average per-channel PSNRs.

SSIM is the standard single-scale form: 11-tap Gaussian window (sigma 1.5),
K1=0.01, K2=0.03, statistics from valid windows only (no padded borders),
computed per channel and averaged over channels.
"""

from __future__ import annotations

import math
import resource
import sys
import time
from dataclasses import dataclass
from typing import Any, Callable, NamedTuple

import numpy as np
from scipy.ndimage import correlate1d

from .image import Image

# Identical images have MSE 0; PSNR is reported as this cap instead of inf.
PSNR_CAP_DB = 99.0


def _check_pair(a: Image, b: Image):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def _mse_exact(a: np.ndarray, b: np.ndarray) -> float:
    d = a.astype(np.float64).ravel() - b.astype(np.float64).ravel()
    return math.fsum(d * d) / d.size


def _psnr_from_mse(mse: float, max_val: float) -> float:
    if mse == 0.0:
        return PSNR_CAP_DB
    return 10.0 * math.log10(max_val * max_val / mse)


def psnr(a: Image, b: Image, max_val: float = 1.0, per_channel: bool = False) -> float:
    """Peak signal-to-noise ratio in dB.

    Default pools MSE over channels and pixels jointly. With
    ``per_channel=True`` each channel's PSNR is computed separately and the
    mean is returned.
    """
    _check_pair(a, b)
    if per_channel:
        vals = [_psnr_from_mse(_mse_exact(a.data[c], b.data[c]), max_val)
                for c in range(a.channels)]
        return float(np.mean(vals))
    return _psnr_from_mse(_mse_exact(a.data, b.data), max_val)


@dataclass(frozen=True)
class SsimParams:
    window: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0

    def __post_init__(self):
        if self.window % 2 == 0 or self.window < 3:
            raise ValueError("window must be odd and >= 3")
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")

    def gaussian(self) -> np.ndarray:
        r = self.window // 2
        i = np.arange(self.window, dtype=np.float64) - r
        g = np.exp(-(i * i) / (2.0 * self.sigma * self.sigma))
        return g / g.sum()

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2


DEFAULT_SSIM = SsimParams()


def _win_stats(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    # Separable Gaussian correlation; only the interior (valid) region is
    # kept, so the boundary mode never influences the result.
    r = g.size // 2
    t = correlate1d(x, g, axis=0, mode="constant")
    t = correlate1d(t, g, axis=1, mode="constant")
    return t[r:-r, r:-r]


def ssim(a: Image, b: Image, params: SsimParams = DEFAULT_SSIM) -> float:
    """Mean SSIM over valid windows, per channel, averaged over channels."""
    _check_pair(a, b)
    if min(a.height, a.width) < params.window:
        raise ValueError(f"image {a.width}x{a.height} smaller than SSIM window {params.window}")
    g = params.gaussian()
    c1, c2 = params.c1, params.c2
    per_channel = []
    for c in range(a.channels):
        xa = a.data[c].astype(np.float64)
        xb = b.data[c].astype(np.float64)
        mu_a = _win_stats(xa, g)
        mu_b = _win_stats(xb, g)
        e_aa = _win_stats(xa * xa, g)
        e_bb = _win_stats(xb * xb, g)
        e_ab = _win_stats(xa * xb, g)
        var_a = e_aa - mu_a * mu_a
        var_b = e_bb - mu_b * mu_b
        cov = e_ab - mu_a * mu_b
        num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
        den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
        per_channel.append(float(np.mean(num / den)))
    return float(np.mean(per_channel))


class MeasureResult(NamedTuple):
    value: Any
    wall_ms: float
    peak_mem_mb: float | None


def _rss_bytes() -> int | None:
    try:
        import psutil

        return psutil.Process().memory_info().rss
    except Exception:
        return None


def _hwm_bytes() -> int | None:
    try:
        peak = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
        # ru_maxrss is kilobytes on Linux, bytes on macOS.
        return peak if sys.platform == "darwin" else peak * 1024
    except Exception:
        return None


def measure(fn: Callable[[], Any]) -> MeasureResult:
    """Run ``fn`` and report wall time plus an approximate peak RSS in MiB.

    Memory is process-level (max of RSS before/after and the OS high-water
    mark), so concurrent work inflates it; ``peak_mem_mb`` is None when no
    probe is available. Wall time is always reported.
    """
    before = _rss_bytes()
    t0 = time.perf_counter()
    value = fn()
    wall_ms = (time.perf_counter() - t0) * 1e3
    candidates = [v for v in (before, _rss_bytes(), _hwm_bytes()) if v is not None]
    peak = max(candidates) / 2.0**20 if candidates else None
    return MeasureResult(value, wall_ms, peak)


__all__ = ["psnr", "ssim", "SsimParams", "DEFAULT_SSIM", "PSNR_CAP_DB",
           "measure", "MeasureResult"]
