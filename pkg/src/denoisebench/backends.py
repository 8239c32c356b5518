"""Denoiser backends: the pluggable restoration function of the pipeline.

Built-in backends are deterministic, shape-preserving desk-scale denoisers
(identity, isotropic Gaussian blur, non-local means, sliding-DCT hard
thresholding). Arbitrary trained models plug in through ``ExternalBackend``,
which exchanges DNB1 raw-float files with a subprocess.

Border handling for all convolution/patch backends is half-sample symmetric
reflection (the edge row is duplicated: ``abc -> cba|abc|cba``), matching
``np.pad(mode="symmetric")`` and ``scipy.ndimage`` ``mode="reflect"``.
"""

from __future__ import annotations

import shlex
import subprocess
import tempfile
import threading
import time
from pathlib import Path

import numpy as np
import scipy.ndimage

from . import _kernels
from .image import Image, load_raw_f32, save_raw_f32


class BackendError(RuntimeError):
    pass


class ExternalExitError(BackendError):
    """Subprocess exited nonzero; carries its captured stderr."""

    def __init__(self, returncode: int, stderr: str):
        super().__init__(f"external denoiser exited with code {returncode}: {stderr.strip()}")
        self.returncode = returncode
        self.stderr = stderr


class ExternalTimeoutError(BackendError):
    pass


class ExternalOutputError(BackendError):
    """Subprocess finished but produced no readable output file."""


class ExternalShapeError(BackendError):
    """Output shape differs from input (swapped axes are an error, not fixed up)."""


class Backend:
    """Base denoiser. Subclasses implement :meth:`denoise`.

    ``deterministic`` declares whether identical input and params always give
    identical output; nondeterministic backends disable bit-exact assertions.
    """

    kind = "abstract"
    deterministic = True

    def __init__(self, name: str | None = None):
        self.name = name or self.kind

    def denoise(self, img: Image) -> Image:
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def describe(self) -> str:
        """Canonical one-line description used in reports and config digests."""
        items = ",".join(f"{k}={v}" for k, v in sorted(self.params().items()))
        return f"{self.kind}:{items}" if items else self.kind


def denoise(b: Backend, x: Image) -> Image:
    """Run one restoration pass (pure function of backend params and input)."""
    return b.denoise(x)


class IdentityBackend(Backend):
    kind = "identity"

    def denoise(self, img: Image) -> Image:
        return img.copy()


class GaussianBlurBackend(Backend):
    """Isotropic Gaussian blur; commutes with every dihedral transform."""

    kind = "gaussian_blur"

    def __init__(self, sigma: float = 1.5, truncate: float = 3.0):
        super().__init__()
        if sigma < 0:
            raise ValueError("blur sigma must be >= 0")
        self.sigma = float(sigma)
        self.truncate = float(truncate)

    def params(self):
        return {"sigma": self.sigma, "truncate": self.truncate}

    def denoise(self, img: Image) -> Image:
        if self.sigma == 0.0:
            return img.copy()
        out = scipy.ndimage.gaussian_filter(
            img.data.astype(np.float64), sigma=(0.0, self.sigma, self.sigma),
            mode="reflect", truncate=self.truncate)
        return Image(out.astype(np.float32))


def nlm_denoise(x: Image, patch: int = 7, search: int = 21, h: float = 0.08,
                sigma: float = 0.0) -> Image:
    """Non-local means with noise-compensated weights.

    Every pixel becomes a weighted average of the candidate pixels in its
    ``search`` x ``search`` window; the weight of a candidate is
    ``exp(-max(d2 - 2*sigma^2, 0) / h^2)`` where ``d2`` is the mean squared
    difference between the two ``patch`` x ``patch`` neighborhoods (averaged
    over channels and patch pixels). ``sigma`` is the known noise level on the
    [0,1] scale; ``h`` controls filtering strength on the same scale.
    """
    if patch % 2 == 0 or search % 2 == 0 or patch < 1 or search < 1:
        raise ValueError("patch and search must be odd and positive")
    if h <= 0:
        raise ValueError("h must be > 0")
    pad = patch // 2 + search // 2
    padded = np.pad(x.data.astype(np.float64), ((0, 0), (pad, pad), (pad, pad)),
                    mode="symmetric")
    out = _kernels.nlm(padded, x.height, x.width, patch, search, float(h), float(sigma))
    return Image(out.astype(np.float32))


class NlmBackend(Backend):
    kind = "nlm"

    def __init__(self, patch: int = 7, search: int = 21, h: float = 0.08,
                 sigma: float = 0.0):
        super().__init__()
        self.patch, self.search, self.h, self.sigma = int(patch), int(search), float(h), float(sigma)

    def params(self):
        return {"patch": self.patch, "search": self.search, "h": self.h, "sigma": self.sigma}

    def denoise(self, img: Image) -> Image:
        return nlm_denoise(img, self.patch, self.search, self.h, self.sigma)


def dct_threshold_denoise(x: Image, block: int = 8, threshold: float = 0.0) -> Image:
    """Sliding-block DCT hard thresholding, stride ``block // 2``.

    Per channel: orthonormal 2-D DCT of every block, AC coefficients with
    magnitude below ``threshold`` zeroed (DC untouched), inverse transform,
    overlapping estimates averaged with uniform weights.
    """
    if block not in (8, 16):
        raise ValueError(f"block must be 8 or 16, got {block}")
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    if x.height < block or x.width < block:
        raise ValueError(f"image {x.width}x{x.height} smaller than block {block}")
    stride = block // 2
    out = np.empty_like(x.data, dtype=np.float64)
    for c in range(x.channels):
        out[c] = _kernels.dct_denoise(x.data[c].astype(np.float64), block, stride,
                                      float(threshold))
    return Image(out.astype(np.float32))


class DctBackend(Backend):
    kind = "dct_threshold"

    def __init__(self, block: int = 8, threshold: float = 0.0):
        super().__init__()
        self.block, self.threshold = int(block), float(threshold)

    def params(self):
        return {"block": self.block, "threshold": self.threshold}

    def denoise(self, img: Image) -> Image:
        return dct_threshold_denoise(img, self.block, self.threshold)


class ExternalBackend(Backend):
    """File-exchange subprocess backend.

    ``cmd`` is a command template containing the placeholders ``{in}`` and
    ``{out}``. Per call, the input is written as a DNB1 raw-float file into a
    fresh private directory, the command runs with that directory as its cwd,
    and ``{out}`` is read back. The subprocess wall time of the last call is
    kept in ``last_subprocess_ms``, separate from harness overhead. At most
    ``max_procs`` subprocesses run concurrently when set.
    """

    kind = "external"
    deterministic = False

    def __init__(self, cmd: str, workdir=None, timeout: float = 600.0,
                 deterministic: bool = False, max_procs: int | None = None):
        super().__init__()
        if "{in}" not in cmd or "{out}" not in cmd:
            raise BackendError("command template must contain {in} and {out}")
        self.cmd = cmd
        self.workdir = Path(workdir) if workdir else None
        self.timeout = timeout
        self.deterministic = deterministic
        self._gate = threading.BoundedSemaphore(max_procs) if max_procs else None
        self.last_subprocess_ms: float | None = None

    def params(self):
        return {"cmd": self.cmd, "timeout": self.timeout,
                "deterministic": self.deterministic}

    def denoise(self, img: Image) -> Image:
        if self._gate is not None:
            with self._gate:
                return self._run(img)
        return self._run(img)

    def _run(self, img: Image) -> Image:
        with tempfile.TemporaryDirectory(dir=self.workdir, prefix="dnb-") as tmp:
            in_path = Path(tmp) / "input.dnb"
            out_path = Path(tmp) / "output.dnb"
            save_raw_f32(img, in_path)
            argv = [tok.replace("{in}", str(in_path)).replace("{out}", str(out_path))
                    for tok in shlex.split(self.cmd)]
            t0 = time.perf_counter()
            try:
                proc = subprocess.run(argv, cwd=tmp, capture_output=True,
                                      text=True, timeout=self.timeout)
            except subprocess.TimeoutExpired as exc:
                raise ExternalTimeoutError(
                    f"external denoiser exceeded {self.timeout}s") from exc
            self.last_subprocess_ms = (time.perf_counter() - t0) * 1e3
            if proc.returncode != 0:
                raise ExternalExitError(proc.returncode, proc.stderr)
            if not out_path.exists():
                raise ExternalOutputError("external denoiser wrote no output file")
            out = load_raw_f32(out_path)
        if out.shape != img.shape:
            raise ExternalShapeError(
                f"output shape {out.shape} does not match input {img.shape}")
        return out


def external_denoise(cmd: str, x: Image, workdir=None, timeout: float = 600.0) -> Image:
    """One-shot convenience wrapper around :class:`ExternalBackend`."""
    return ExternalBackend(cmd, workdir=workdir, timeout=timeout).denoise(x)


def make_backend(spec: str, noise_sigma: float | None = None, cmd: str | None = None,
                 workdir=None, timeout: float = 600.0) -> Backend:
    """Build a backend from a CLI-style spec string ``kind[:key=val,...]``.

    When ``noise_sigma`` (on the [0,1] scale) is given, sigma-dependent
    defaults are filled in: NLM gets ``sigma`` and ``h = 0.4*sigma``, the DCT
    backend gets ``threshold = 2.7*sigma``.
    """
    kind, _, tail = spec.partition(":")
    kv: dict[str, str] = {}
    if tail:
        for item in tail.split(","):
            k, _, v = item.partition("=")
            if not _:
                raise BackendError(f"malformed backend parameter {item!r}")
            kv[k.strip()] = v.strip()
    if kind == "identity":
        return IdentityBackend()
    if kind in ("gaussian", "gaussian_blur"):
        return GaussianBlurBackend(sigma=float(kv.get("sigma", 1.5)),
                                   truncate=float(kv.get("truncate", 3.0)))
    if kind == "nlm":
        sigma = float(kv["sigma"]) if "sigma" in kv else (noise_sigma or 0.0)
        h = float(kv["h"]) if "h" in kv else (0.4 * sigma if sigma > 0 else 0.08)
        return NlmBackend(patch=int(kv.get("patch", 7)), search=int(kv.get("search", 21)),
                          h=h, sigma=sigma)
    if kind in ("dct", "dct_threshold"):
        thr = float(kv["threshold"]) if "threshold" in kv else 2.7 * (noise_sigma or 0.0)
        return DctBackend(block=int(kv.get("block", 8)), threshold=thr)
    if kind == "external":
        if not cmd:
            raise BackendError("external backend needs a command template")
        return ExternalBackend(cmd, workdir=workdir, timeout=timeout,
                               deterministic=kv.get("deterministic", "0") in ("1", "true"))
    raise BackendError(f"unknown backend kind {kind!r}")
