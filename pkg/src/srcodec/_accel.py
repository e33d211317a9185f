"""Hot numeric kernels: numba-jitted with a pure-numpy fallback.

The numba path is the default. Set SRCODEC_DISABLE_NUMBA=1 to force the
numpy fallback (also used automatically when numba is not importable).
Both paths accumulate in identical order so resampled rasters are
bit-identical regardless of which one ran; `benchmarks/bench_kernels.py`
compares their throughput.
"""

from __future__ import annotations

import os

import numpy as np

_env = os.environ.get("SRCODEC_DISABLE_NUMBA", "").strip()
_want_numba = _env in ("", "0")

if _want_numba:
    try:
        from numba import njit

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        HAVE_NUMBA = False
else:
    HAVE_NUMBA = False

USING_NUMBA = HAVE_NUMBA


# --- separable resampling passes ---
#
# out[i, j] = sum_s src[i, idx[j, s]] * w[j, s]   (axis 1)
# out[i, j] = sum_s src[idx[i, s], j] * w[i, s]   (axis 0)
#
# idx/w are the per-output-pixel support windows prepared in resample.py.


def _resample_axis1_np(src, idx, w):
    out = np.zeros((src.shape[0], idx.shape[0]), dtype=np.float64)
    for s in range(idx.shape[1]):
        out += src[:, idx[:, s]] * w[np.newaxis, :, s]
    return out


def _resample_axis0_np(src, idx, w):
    out = np.zeros((idx.shape[0], src.shape[1]), dtype=np.float64)
    for s in range(idx.shape[1]):
        out += src[idx[:, s], :] * w[:, s, np.newaxis]
    return out


if HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _resample_axis1_nb(src, idx, w):
        rows = src.shape[0]
        out_w = idx.shape[0]
        support = idx.shape[1]
        out = np.empty((rows, out_w), dtype=np.float64)
        for i in range(rows):
            for j in range(out_w):
                acc = 0.0
                for s in range(support):
                    acc += src[i, idx[j, s]] * w[j, s]
                out[i, j] = acc
        return out

    @njit(cache=True, nogil=True)
    def _resample_axis0_nb(src, idx, w):
        out_h = idx.shape[0]
        cols = src.shape[1]
        support = idx.shape[1]
        out = np.empty((out_h, cols), dtype=np.float64)
        for i in range(out_h):
            for j in range(cols):
                acc = 0.0
                for s in range(support):
                    acc += src[idx[i, s], j] * w[i, s]
                out[i, j] = acc
        return out

    resample_axis1 = _resample_axis1_nb
    resample_axis0 = _resample_axis0_nb
else:
    resample_axis1 = _resample_axis1_np
    resample_axis0 = _resample_axis0_np


# --- PNG scanline unfiltering ---
#
# rows: (n, stride) uint8 of filtered bytes (filter byte already stripped),
# ftypes: (n,) uint8 filter type per scanline, bpp: bytes per pixel.
# Reconstruction is in-place, all arithmetic mod 256.


def _paeth(a, b, c):
    p = a + b - c
    pa = abs(p - a)
    pb = abs(p - b)
    pc = abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    if pb <= pc:
        return b
    return c


def _unfilter_np(rows, ftypes, bpp):
    n, stride = rows.shape
    for r in range(n):
        f = ftypes[r]
        if f == 0:
            continue
        if f == 2:
            if r > 0:
                rows[r] += rows[r - 1]
            continue
        if f == 1:
            # mod-256 prefix sum over each byte lane offset by bpp
            for lane in range(bpp):
                col = rows[r, lane::bpp].astype(np.int64)
                rows[r, lane::bpp] = np.cumsum(col).astype(np.uint8)
            continue
        prev = rows[r - 1] if r > 0 else np.zeros(stride, dtype=np.uint8)
        cur = rows[r]
        if f == 3:
            for i in range(stride):
                left = int(cur[i - bpp]) if i >= bpp else 0
                cur[i] = (int(cur[i]) + ((left + int(prev[i])) >> 1)) & 0xFF
        elif f == 4:
            for i in range(stride):
                left = int(cur[i - bpp]) if i >= bpp else 0
                up = int(prev[i])
                ul = int(prev[i - bpp]) if i >= bpp else 0
                cur[i] = (int(cur[i]) + _paeth(left, up, ul)) & 0xFF
        else:
            raise ValueError(f"bad PNG filter type {f}")
    return rows


if HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _unfilter_nb(rows, ftypes, bpp):
        n, stride = rows.shape
        for r in range(n):
            f = ftypes[r]
            if f == 0:
                continue
            for i in range(stride):
                left = np.int64(rows[r, i - bpp]) if i >= bpp else 0
                up = np.int64(rows[r - 1, i]) if r > 0 else 0
                if f == 1:
                    rows[r, i] = np.uint8((rows[r, i] + left) & 0xFF)
                elif f == 2:
                    rows[r, i] = np.uint8((rows[r, i] + up) & 0xFF)
                elif f == 3:
                    rows[r, i] = np.uint8((rows[r, i] + ((left + up) >> 1)) & 0xFF)
                else:
                    ul = np.int64(rows[r - 1, i - bpp]) if (r > 0 and i >= bpp) else 0
                    p = left + up - ul
                    pa = abs(p - left)
                    pb = abs(p - up)
                    pc = abs(p - ul)
                    if pa <= pb and pa <= pc:
                        pred = left
                    elif pb <= pc:
                        pred = up
                    else:
                        pred = ul
                    rows[r, i] = np.uint8((rows[r, i] + pred) & 0xFF)
        return rows

    def unfilter_scanlines(rows, ftypes, bpp):
        if np.any(ftypes > 4):
            bad = int(ftypes[ftypes > 4][0])
            raise ValueError(f"bad PNG filter type {bad}")
        return _unfilter_nb(rows, ftypes, bpp)

else:
    unfilter_scanlines = _unfilter_np
