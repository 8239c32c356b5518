"""Vectorized NumPy/SciPy fallbacks for the hot denoising kernels.

Same contracts as the compiled module ``_native``; selection happens in the
package ``__init__``. Kept allocation-heavy but branch-free so it stays within
a small factor of the native code.
"""

from __future__ import annotations

import numpy as np
import scipy.fft

NAME = "numpy"


def _box_valid_sum(d: np.ndarray, p: int) -> np.ndarray:
    """Valid-mode p x p box sum of a 2-D plane via running cumsums."""
    c = np.cumsum(d, axis=0)
    rows = np.empty((d.shape[0] - p + 1, d.shape[1]), dtype=np.float64)
    rows[0] = c[p - 1]
    rows[1:] = c[p:] - c[:-p]
    c2 = np.cumsum(rows, axis=1)
    out = np.empty((rows.shape[0], d.shape[1] - p + 1), dtype=np.float64)
    out[:, 0] = c2[:, p - 1]
    out[:, 1:] = c2[:, p:] - c2[:, :-p]
    return out


def nlm(padded: np.ndarray, height: int, width: int, patch: int, search: int,
        h: float, sigma: float) -> np.ndarray:
    """Non-local means on a pre-padded planar image.

    ``padded`` is (C, height + 2*pad, width + 2*pad) float64 with
    ``pad = patch//2 + search//2``. Weights follow the noise-compensated rule
    ``exp(-max(d2 - 2*sigma^2, 0) / h^2)`` where ``d2`` is the mean squared
    patch difference over channels and patch pixels.
    """
    c, ph, sh = padded.shape[0], patch // 2, search // 2
    pad = ph + sh
    norm = 1.0 / (c * patch * patch)
    num = np.zeros((c, height, width), dtype=np.float64)
    den = np.zeros((height, width), dtype=np.float64)
    ref = padded[:, sh : sh + height + 2 * ph, sh : sh + width + 2 * ph]
    for dy in range(-sh, sh + 1):
        for dx in range(-sh, sh + 1):
            cand = padded[:, sh + dy : sh + dy + height + 2 * ph,
                          sh + dx : sh + dx + width + 2 * ph]
            diff = ref - cand
            d2 = _box_valid_sum(np.einsum("cij,cij->ij", diff, diff), patch) * norm
            w = np.exp(-np.maximum(d2 - 2.0 * sigma * sigma, 0.0) / (h * h))
            num += w * padded[:, pad + dy : pad + dy + height,
                              pad + dx : pad + dx + width]
            den += w
    return num / den


def _dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II matrix (rows are basis vectors)."""
    k = np.arange(n)[:, None].astype(np.float64)
    m = np.arange(n)[None, :].astype(np.float64)
    d = np.cos(np.pi * (2.0 * m + 1.0) * k / (2.0 * n)) * np.sqrt(2.0 / n)
    d[0] /= np.sqrt(2.0)
    return d


def _grid_positions(extent: int, block: int, stride: int) -> np.ndarray:
    pos = list(range(0, extent - block + 1, stride))
    if pos[-1] != extent - block:
        pos.append(extent - block)  # right/bottom aligned tail block
    return np.asarray(pos)


def dct_denoise(plane: np.ndarray, block: int, stride: int, threshold: float) -> np.ndarray:
    """Sliding-block orthonormal DCT with hard AC thresholding.

    Blocks start every ``stride`` pixels (tail blocks edge-aligned), AC
    coefficients with magnitude below ``threshold`` are zeroed, and the
    overlapping reconstructions are averaged with uniform weights.
    """
    hgt, wid = plane.shape
    ys = _grid_positions(hgt, block, stride)
    xs = _grid_positions(wid, block, stride)
    windows = np.lib.stride_tricks.sliding_window_view(plane, (block, block))
    blocks = windows[np.ix_(ys, xs)]  # (ny, nx, b, b)
    coef = scipy.fft.dctn(blocks, axes=(-2, -1), norm="ortho")
    kill = np.abs(coef) < threshold
    kill[..., 0, 0] = False  # DC is never touched
    coef[kill] = 0.0
    rec = scipy.fft.idctn(coef, axes=(-2, -1), norm="ortho")
    acc = np.zeros_like(plane)
    cnt = np.zeros_like(plane)
    for iy, y in enumerate(ys):
        for ix, x in enumerate(xs):
            acc[y : y + block, x : x + block] += rec[iy, ix]
            cnt[y : y + block, x : x + block] += 1.0
    return acc / cnt
