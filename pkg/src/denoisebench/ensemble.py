"""Dihedral symmetries of the square and the x8 geometric self-ensemble.

The eight transforms are exact pixel permutations (no interpolation). The
rotation convention is counter-clockwise with x right and y down:
``rot90`` maps source pixel (W-1-y', x') to destination (x', y'). The group
average is convention-independent, but per-element fixtures need one pinned.

``self_ensemble`` implements the uniform test-time average

    out = 1/K * sum_k inverse(t_k)( f( t_k(x) ) )

over a transform subset (default all 8, K=8). Accumulation is float64 in
k-ascending order, so the result is identical no matter how the K backend
passes are scheduled.
"""

from __future__ import annotations

from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .image import Image


class DihedralElement(Enum):
    IDENTITY = "identity"
    ROT90 = "rot90"
    ROT180 = "rot180"
    ROT270 = "rot270"
    HFLIP = "hflip"
    VFLIP = "vflip"
    TRANSPOSE = "transpose"
    ANTI_TRANSPOSE = "anti_transpose"


_E = DihedralElement

#: Elements in the canonical k-ascending order used for ensembling.
ALL_ELEMENTS: tuple[DihedralElement, ...] = tuple(_E)

#: The Klein four-subgroup used by the K=4 "flips" ablation mode.
FLIP_ELEMENTS: tuple[DihedralElement, ...] = (_E.IDENTITY, _E.HFLIP, _E.VFLIP, _E.ROT180)

#: Elements that swap width and height.
SHAPE_SWAPPING = frozenset({_E.ROT90, _E.ROT270, _E.TRANSPOSE, _E.ANTI_TRANSPOSE})


def _apply_plane(t: DihedralElement, a: np.ndarray) -> np.ndarray:
    # a has shape (C, H, W); all ops are views until the final copy.
    if t is _E.IDENTITY:
        out = a
    elif t is _E.HFLIP:
        out = a[:, :, ::-1]
    elif t is _E.VFLIP:
        out = a[:, ::-1, :]
    elif t is _E.ROT180:
        out = a[:, ::-1, ::-1]
    elif t is _E.TRANSPOSE:
        out = a.transpose(0, 2, 1)
    elif t is _E.ROT90:  # counter-clockwise
        out = a.transpose(0, 2, 1)[:, ::-1, :]
    elif t is _E.ROT270:
        out = a.transpose(0, 2, 1)[:, :, ::-1]
    elif t is _E.ANTI_TRANSPOSE:
        out = a.transpose(0, 2, 1)[:, ::-1, ::-1]
    else:  # pragma: no cover
        raise ValueError(t)
    return np.ascontiguousarray(out)


def apply(t: DihedralElement, img: Image) -> Image:
    """Apply the exact pixel permutation ``t``."""
    return Image(_apply_plane(t, img.data))


def _composition_table() -> dict[tuple[DihedralElement, DihedralElement], DihedralElement]:
    # Derive compose(a, b) = "b first, then a" by acting on a labeled probe
    # whose 8 transformed versions are pairwise distinct (3x5 index plane).
    probe = np.arange(15, dtype=np.float32).reshape(1, 3, 5)
    images = {t: _apply_plane(t, probe) for t in _E}

    def find(arr: np.ndarray) -> DihedralElement:
        for t, ref in images.items():
            if ref.shape == arr.shape and np.array_equal(ref, arr):
                return t
        raise AssertionError("dihedral set not closed")  # pragma: no cover

    return {(a, b): find(_apply_plane(a, images[b])) for a in _E for b in _E}


_COMPOSE = _composition_table()
_INVERSE = {
    t: next(u for u in _E if _COMPOSE[(t, u)] is _E.IDENTITY) for t in _E
}


def compose(a: DihedralElement, b: DihedralElement) -> DihedralElement:
    """Element equivalent to applying ``b`` first and then ``a``."""
    return _COMPOSE[(a, b)]


def inverse(t: DihedralElement) -> DihedralElement:
    """Element undoing ``t``: ``apply(inverse(t), apply(t, img)) == img``."""
    return _INVERSE[t]


class EnsembleError(RuntimeError):
    """Backend failure inside the ensemble, tagged with the failing element."""

    def __init__(self, element: DihedralElement, cause: BaseException):
        super().__init__(f"backend failed under transform {element.value}: {cause}")
        self.element = element


def self_ensemble(
    f: Callable[[Image], Image],
    x: Image,
    elements: Sequence[DihedralElement] = ALL_ELEMENTS,
) -> Image:
    """Average ``inverse(t)(f(t(x)))`` over ``elements`` with equal weights."""
    if not elements:
        raise ValueError("ensemble needs at least one element")
    acc = np.zeros(x.shape, dtype=np.float64)
    for t in elements:
        try:
            pred = f(apply(t, x))
        except Exception as exc:
            raise EnsembleError(t, exc) from exc
        back = apply(inverse(t), pred)
        if back.shape != x.shape:
            raise EnsembleError(t, ValueError(
                f"backend changed shape: {back.shape} vs {x.shape}"))
        acc += back.data
    return Image((acc / len(elements)).astype(np.float32))
