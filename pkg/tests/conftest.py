"""Shared fixtures: deterministic test images, corpora on disk, and a
deliberately non-equivariant backend for ensemble oracle tests."""

import numpy as np
import pytest
import scipy.ndimage

from denoisebench.backends import Backend
from denoisebench.image import Image, save_png


def rand_image(seed: int, width: int, height: int, channels: int = 3) -> Image:
    rng = np.random.default_rng(seed)
    return Image(rng.random((channels, height, width), dtype=np.float32))


def smooth_image(seed: int, width: int, height: int) -> Image:
    """Piecewise-smooth synthetic content a denoiser can actually exploit."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    a, b, c = rng.uniform(0.05, 0.2, 3)
    base = 0.5 + 0.35 * np.sin(a * xx + rng.uniform(0, 6)) * np.cos(b * yy)
    step = (xx > width * rng.uniform(0.3, 0.7)).astype(np.float64)
    planes = [np.clip(base + 0.25 * step * (k - 1) + c * (k - 1), 0.0, 1.0)
              for k in range(3)]
    return Image(np.stack(planes).astype(np.float32))


class HBoxBlurBackend(Backend):
    """Horizontal-only box blur: deterministic but not dihedral-equivariant."""

    kind = "hbox_blur"

    def __init__(self, radius: int = 2):
        super().__init__()
        self.radius = radius

    def params(self):
        return {"radius": self.radius}

    def denoise(self, img: Image) -> Image:
        out = scipy.ndimage.uniform_filter1d(
            img.data.astype(np.float64), size=2 * self.radius + 1, axis=2,
            mode="reflect")
        return Image(out.astype(np.float32))


@pytest.fixture
def hbox_backend() -> HBoxBlurBackend:
    return HBoxBlurBackend(radius=2)


@pytest.fixture
def make_corpus(tmp_path):
    """Write ``n`` smooth PNGs into a fresh directory and return its path."""

    def build(n: int = 3, width: int = 48, height: int = 40, name: str = "clean",
              depth: int = 8):
        d = tmp_path / name
        d.mkdir(exist_ok=True)
        for i in range(n):
            save_png(smooth_image(100 + i, width, height), d / f"img{i:03d}.png",
                     depth=depth)
        return d

    return build
