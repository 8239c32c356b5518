"""Hot-kernel dispatch: compiled extension when available, NumPy otherwise.

``DENOISEBENCH_KERNELS=numpy`` (or ``native``) forces a specific
implementation; the default prefers the compiled module and silently falls
back. ``ACTIVE`` names the implementation in use so reports and benchmarks can
record it.
"""

from __future__ import annotations

import os

from . import _numpy


def get_impl(name: str | None = None):
    """Return the kernel module for ``name`` ("native", "numpy", or None=auto)."""
    if name in (None, "", "auto"):
        try:
            from . import _native
            return _native
        except ImportError:
            return _numpy
    if name == "numpy":
        return _numpy
    if name == "native":
        from . import _native  # ImportError surfaces to the caller
        return _native
    raise ValueError(f"unknown kernel implementation {name!r}")


_impl = get_impl(os.environ.get("DENOISEBENCH_KERNELS"))

nlm = _impl.nlm
dct_denoise = _impl.dct_denoise
ACTIVE: str = _impl.NAME
