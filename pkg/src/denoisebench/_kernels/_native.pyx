# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the two hot inner loops: non-local means patch search
and sliding-block DCT hard thresholding.

Contracts match ``_numpy`` exactly (same padding, same weight rule, same block
grid); the test suite cross-checks both against brute-force references.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs

cnp.import_array()

NAME = "native"


cdef void _box_valid_sum(double[:, ::1] d, int p, double[:, ::1] rows,
                         double[:, ::1] out) nogil:
    # rows: (Hd-p+1, Wd) scratch; out: (Hd-p+1, Wd-p+1)
    cdef Py_ssize_t hd = d.shape[0], wd = d.shape[1]
    cdef Py_ssize_t y, x
    cdef double s
    for x in range(wd):
        s = 0.0
        for y in range(p):
            s += d[y, x]
        rows[0, x] = s
        for y in range(1, hd - p + 1):
            s += d[y + p - 1, x] - d[y - 1, x]
            rows[y, x] = s
    for y in range(hd - p + 1):
        s = 0.0
        for x in range(p):
            s += rows[y, x]
        out[y, 0] = s
        for x in range(1, wd - p + 1):
            s += rows[y, x + p - 1] - rows[y, x - 1]
            out[y, x] = s


def nlm(cnp.ndarray padded_arr, int height, int width, int patch, int search,
        double h, double sigma):
    """Non-local means on a pre-padded (C, H+2*pad, W+2*pad) float64 image."""
    cdef double[:, :, ::1] padded = np.ascontiguousarray(padded_arr, dtype=np.float64)
    cdef int c = padded.shape[0]
    cdef int ph = patch // 2, sh = search // 2
    cdef int pad = ph + sh
    cdef double norm = 1.0 / (c * patch * patch)
    cdef double two_sigma2 = 2.0 * sigma * sigma
    cdef double inv_h2 = 1.0 / (h * h)

    num_arr = np.zeros((c, height, width), dtype=np.float64)
    den_arr = np.zeros((height, width), dtype=np.float64)
    diff_arr = np.empty((height + 2 * ph, width + 2 * ph), dtype=np.float64)
    rows_arr = np.empty((height + ph, width + 2 * ph), dtype=np.float64)
    box_arr = np.empty((height, width), dtype=np.float64)

    cdef double[:, :, ::1] num = num_arr
    cdef double[:, ::1] den = den_arr
    cdef double[:, ::1] diff = diff_arr
    cdef double[:, ::1] rows = rows_arr
    cdef double[:, ::1] box = box_arr

    cdef Py_ssize_t dy, dx, y, x, ch
    cdef double dv, d2, w
    with nogil:
        for dy in range(-sh, sh + 1):
            for dx in range(-sh, sh + 1):
                for y in range(height + 2 * ph):
                    for x in range(width + 2 * ph):
                        d2 = 0.0
                        for ch in range(c):
                            dv = padded[ch, sh + y, sh + x] - \
                                 padded[ch, sh + dy + y, sh + dx + x]
                            d2 += dv * dv
                        diff[y, x] = d2
                _box_valid_sum(diff, patch, rows, box)
                for y in range(height):
                    for x in range(width):
                        d2 = box[y, x] * norm - two_sigma2
                        if d2 < 0.0:
                            d2 = 0.0
                        w = exp(-d2 * inv_h2)
                        den[y, x] += w
                        for ch in range(c):
                            num[ch, y, x] += w * padded[ch, pad + dy + y, pad + dx + x]
    return num_arr / den_arr[None, :, :]


def _grid_positions(int extent, int block, int stride):
    # wraparound is off module-wide, so avoid negative list indices here.
    pos = list(range(0, extent - block + 1, stride))
    if pos[len(pos) - 1] != extent - block:
        pos.append(extent - block)
    return pos


_DCT_CACHE = {}


def _dct_matrix(int n):
    if n not in _DCT_CACHE:
        k = np.arange(n)[:, None].astype(np.float64)
        m = np.arange(n)[None, :].astype(np.float64)
        d = np.cos(np.pi * (2.0 * m + 1.0) * k / (2.0 * n)) * np.sqrt(2.0 / n)
        d[0] /= np.sqrt(2.0)
        _DCT_CACHE[n] = d
    return _DCT_CACHE[n]


def dct_denoise(cnp.ndarray plane_arr, int block, int stride, double threshold):
    """Sliding-block DCT hard thresholding; same grid and rule as ``_numpy``."""
    cdef double[:, ::1] plane = np.ascontiguousarray(plane_arr, dtype=np.float64)
    cdef int hgt = plane.shape[0], wid = plane.shape[1]
    ys_list = _grid_positions(hgt, block, stride)
    xs_list = _grid_positions(wid, block, stride)
    cdef long[::1] ys = np.asarray(ys_list, dtype=np.int64)
    cdef long[::1] xs = np.asarray(xs_list, dtype=np.int64)
    cdef double[:, ::1] dmat = _dct_matrix(block)

    acc_arr = np.zeros((hgt, wid), dtype=np.float64)
    cnt_arr = np.zeros((hgt, wid), dtype=np.float64)
    cdef double[:, ::1] acc = acc_arr
    cdef double[:, ::1] cnt = cnt_arr
    tmp_arr = np.empty((block, block), dtype=np.float64)
    coef_arr = np.empty((block, block), dtype=np.float64)
    cdef double[:, ::1] tmp = tmp_arr
    cdef double[:, ::1] coef = coef_arr

    cdef Py_ssize_t iy, ix, y0, x0, i, j, k
    cdef double s
    with nogil:
        for iy in range(ys.shape[0]):
            y0 = ys[iy]
            for ix in range(xs.shape[0]):
                x0 = xs[ix]
                # coef = D * B * D^T
                for i in range(block):
                    for j in range(block):
                        s = 0.0
                        for k in range(block):
                            s += dmat[i, k] * plane[y0 + k, x0 + j]
                        tmp[i, j] = s
                for i in range(block):
                    for j in range(block):
                        s = 0.0
                        for k in range(block):
                            s += tmp[i, k] * dmat[j, k]
                        if fabs(s) < threshold and not (i == 0 and j == 0):
                            s = 0.0
                        coef[i, j] = s
                # rec = D^T * coef * D, accumulated in place
                for i in range(block):
                    for j in range(block):
                        s = 0.0
                        for k in range(block):
                            s += dmat[k, i] * coef[k, j]
                        tmp[i, j] = s
                for i in range(block):
                    for j in range(block):
                        s = 0.0
                        for k in range(block):
                            s += tmp[i, k] * dmat[k, j]
                        acc[y0 + i, x0 + j] += s
                        cnt[y0 + i, x0 + j] += 1.0
    return acc_arr / cnt_arr
