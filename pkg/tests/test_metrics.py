"""PSNR / SSIM metrics against naive oracles, plus the measure() probe."""

import math

import numpy as np
import pytest

from denoisebench.ensemble import ALL_ELEMENTS, apply
from denoisebench.image import Image
from denoisebench.metrics import (DEFAULT_SSIM, PSNR_CAP_DB, SsimParams, measure,
                                  psnr, ssim)

from conftest import rand_image


# --- oracles ---------------------------------------------------------------

def ssim_oracle(a: Image, b: Image, window=11, sigma=1.5, k1=0.01, k2=0.03,
                dynamic_range=1.0) -> float:
    """Valid-window SSIM with an explicit per-window double loop."""
    r = window // 2
    i = np.arange(window, dtype=np.float64) - r
    g1 = np.exp(-(i * i) / (2.0 * sigma * sigma))
    g1 = g1 / g1.sum()
    w = np.outer(g1, g1)
    c1 = (k1 * dynamic_range) ** 2
    c2 = (k2 * dynamic_range) ** 2
    chans = []
    for c in range(a.channels):
        xa = a.data[c].astype(np.float64)
        xb = b.data[c].astype(np.float64)
        scores = []
        for y in range(a.height - window + 1):
            for x in range(a.width - window + 1):
                pa = xa[y:y + window, x:x + window]
                pb = xb[y:y + window, x:x + window]
                mu_a = float((w * pa).sum())
                mu_b = float((w * pb).sum())
                va = float((w * pa * pa).sum()) - mu_a * mu_a
                vb = float((w * pb * pb).sum()) - mu_b * mu_b
                cov = float((w * pa * pb).sum()) - mu_a * mu_b
                num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
                den = (mu_a * mu_a + mu_b * mu_b + c1) * (va + vb + c2)
                scores.append(num / den)
        chans.append(float(np.mean(scores)))
    return float(np.mean(chans))


def psnr_oracle(a: Image, b: Image, max_val=1.0) -> float:
    d = a.data.astype(np.float64) - b.data.astype(np.float64)
    mse = float((d * d).sum()) / d.size
    return 10.0 * math.log10(max_val * max_val / mse)


# --- PSNR --------------------------------------------------------------------

def test_psnr_matches_oracle():
    a = rand_image(0, 24, 18)
    b = rand_image(1, 24, 18)
    assert psnr(a, b) == pytest.approx(psnr_oracle(a, b), abs=1e-10)


def test_psnr_constant_offset_closed_form():
    a = Image.zeros(16, 16)
    b = Image.full(16, 16, 0.1)
    # MSE is (0.1f)^2 exactly, so PSNR sits within float32 rounding of 20 dB
    assert abs(psnr(a, b) - 20.0) < 1e-4
    assert round(psnr(a, b), 4) == 20.0


def test_psnr_identical_images_capped():
    a = rand_image(2, 12, 12)
    assert psnr(a, a) == PSNR_CAP_DB


def test_psnr_symmetry_exact():
    a = rand_image(3, 20, 14)
    b = rand_image(4, 20, 14)
    assert psnr(a, b) == psnr(b, a)


def test_psnr_dihedral_invariance_exact():
    # exact summation makes joint PSNR invariant under pixel permutations
    a = rand_image(5, 20, 14)
    b = rand_image(6, 20, 14)
    base = psnr(a, b)
    for e in ALL_ELEMENTS:
        assert psnr(apply(e, a), apply(e, b)) == base


def test_psnr_max_val():
    a = Image.zeros(8, 8)
    b = Image.full(8, 8, 25.5)
    assert psnr(a, b, max_val=255.0) == pytest.approx(20.0, abs=1e-4)


def test_psnr_per_channel_flag():
    a = rand_image(7, 16, 16)
    b = a.copy()
    b.data[0] += 0.2
    expect = np.mean([psnr(Image(a.data[c:c + 1]), Image(b.data[c:c + 1]))
                      for c in range(3)])
    assert psnr(a, b, per_channel=True) == pytest.approx(expect, abs=1e-10)
    assert psnr(a, b, per_channel=True) != pytest.approx(psnr(a, b), abs=1e-6)


def test_psnr_shape_mismatch():
    with pytest.raises(ValueError):
        psnr(rand_image(0, 8, 8), rand_image(0, 8, 10))


# --- SSIM ----------------------------------------------------------------------

def test_ssim_matches_naive_oracle():
    for seed in (0, 1, 2):
        a = rand_image(seed, 20, 16)
        b = rand_image(seed + 100, 20, 16)
        assert ssim(a, b) == pytest.approx(ssim_oracle(a, b), abs=1e-9), seed


def test_ssim_noisy_pair_matches_oracle():
    a = rand_image(10, 24, 24)
    b = Image((a.data + np.float32(0.1) * rand_image(11, 24, 24).data).astype(np.float32))
    assert ssim(a, b) == pytest.approx(ssim_oracle(a, b), abs=1e-9)


def test_ssim_self_is_exactly_one():
    a = rand_image(12, 16, 16)
    assert ssim(a, a) == 1.0


def test_ssim_constant_zero_vs_one():
    a = Image.zeros(16, 16)
    b = Image.full(16, 16, 1.0)
    c1 = DEFAULT_SSIM.c1
    assert ssim(a, b) == pytest.approx(c1 / (1.0 + c1), abs=1e-12)
    assert abs(ssim(a, b) - 9.999e-5) <= 1e-8


def test_ssim_symmetry():
    a = rand_image(13, 18, 18)
    b = rand_image(14, 18, 18)
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)


def test_ssim_dihedral_invariance():
    a = rand_image(15, 18, 14)
    b = rand_image(16, 18, 14)
    base = ssim(a, b)
    for e in ALL_ELEMENTS:
        assert ssim(apply(e, a), apply(e, b)) == pytest.approx(base, abs=1e-9)


def test_ssim_window_weights_sum_to_one():
    g = DEFAULT_SSIM.gaussian()
    assert g.size == 11
    assert abs(g.sum() - 1.0) < 1e-12
    assert g.argmax() == 5


def test_ssim_params_validation():
    with pytest.raises(ValueError):
        SsimParams(window=10)
    with pytest.raises(ValueError):
        SsimParams(window=1)
    with pytest.raises(ValueError):
        SsimParams(sigma=0.0)


def test_ssim_image_smaller_than_window():
    with pytest.raises(ValueError):
        ssim(rand_image(0, 10, 10), rand_image(1, 10, 10))


def test_ssim_custom_params():
    a = rand_image(17, 16, 16)
    b = rand_image(18, 16, 16)
    p = SsimParams(window=7, sigma=1.0)
    assert ssim(a, b, p) == pytest.approx(
        ssim_oracle(a, b, window=7, sigma=1.0), abs=1e-9)


# --- measure -------------------------------------------------------------------

def test_measure_returns_value_and_wall():
    res = measure(lambda: 41 + 1)
    assert res.value == 42
    assert res.wall_ms > 0.0


def test_measure_peak_memory_probe():
    base = measure(lambda: None)
    if base.peak_mem_mb is None:
        pytest.skip("no memory probe on this platform")
    # the high-water mark is process-lifetime monotonic, so allocate past the
    # baseline peak (not just past the current RSS) and keep the array alive
    # through the post-call sample
    alloc_mb = int(base.peak_mem_mb) + 120
    big = measure(lambda: np.ones(alloc_mb * 2**20 // 8, dtype=np.float64))
    assert big.peak_mem_mb is not None
    assert big.peak_mem_mb - base.peak_mem_mb >= 90.0
    assert big.value.nbytes == alloc_mb * 2**20
