"""Hot kernels behind the convolution layers: patch gather/scatter.

``im2col`` unrolls sliding k x k windows of an NHWC batch into a matrix
so convolution becomes one BLAS matmul; ``col2im`` is its adjoint
(scatter-add), used in the backward pass. Both exist as numba ``@njit``
kernels and as pure-numpy fallbacks; :mod:`smokesense.backend` picks the
path at import time.

Layout conventions (fixed across both paths):
  input   xp    (N, Hp, Wp, C)   zero-padded image batch
  columns cols  (N*OH*OW, KH*KW*C), column index = (i*KW + j)*C + c
"""

from __future__ import annotations

import numpy as np

from smokesense.backend import numba_enabled


def conv_out_size(size: int, k: int, stride: int) -> int:
    return (size - k) // stride + 1


# ---------------------------------------------------------------------------
# pure-numpy fallbacks
# ---------------------------------------------------------------------------


def _im2col_numpy(xp, kh, kw, stride):
    n, hp, wp, c = xp.shape
    oh = conv_out_size(hp, kh, stride)
    ow = conv_out_size(wp, kw, stride)
    sn, sh, sw, sc = xp.strides
    windows = np.lib.stride_tricks.as_strided(
        xp,
        shape=(n, oh, ow, kh, kw, c),
        strides=(sn, sh * stride, sw * stride, sh, sw, sc),
        writeable=False,
    )
    return np.ascontiguousarray(windows).reshape(n * oh * ow, kh * kw * c)


def _col2im_numpy(cols, n, hp, wp, c, kh, kw, stride):
    oh = conv_out_size(hp, kh, stride)
    ow = conv_out_size(wp, kw, stride)
    patches = cols.reshape(n, oh, ow, kh, kw, c)
    out = np.zeros((n, hp, wp, c), dtype=cols.dtype)
    # kh*kw strided slice-adds instead of a per-element scatter
    for i in range(kh):
        for j in range(kw):
            out[:, i : i + oh * stride : stride, j : j + ow * stride : stride, :] += patches[
                :, :, :, i, j, :
            ]
    return out


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

if numba_enabled():
    from numba import njit

    @njit(cache=True)
    def _im2col_numba(xp, kh, kw, stride):
        n, hp, wp, c = xp.shape
        oh = (hp - kh) // stride + 1
        ow = (wp - kw) // stride + 1
        cols = np.empty((n * oh * ow, kh * kw * c), dtype=xp.dtype)
        for b in range(n):
            for y in range(oh):
                for x in range(ow):
                    row = (b * oh + y) * ow + x
                    y0 = y * stride
                    x0 = x * stride
                    col = 0
                    for i in range(kh):
                        for j in range(kw):
                            for ch in range(c):
                                cols[row, col] = xp[b, y0 + i, x0 + j, ch]
                                col += 1
        return cols

    @njit(cache=True)
    def _col2im_numba(cols, n, hp, wp, c, kh, kw, stride):
        oh = (hp - kh) // stride + 1
        ow = (wp - kw) // stride + 1
        out = np.zeros((n, hp, wp, c), dtype=cols.dtype)
        for b in range(n):
            for y in range(oh):
                for x in range(ow):
                    row = (b * oh + y) * ow + x
                    y0 = y * stride
                    x0 = x * stride
                    col = 0
                    for i in range(kh):
                        for j in range(kw):
                            for ch in range(c):
                                out[b, y0 + i, x0 + j, ch] += cols[row, col]
                                col += 1
        return out

    im2col = _im2col_numba
    col2im = _col2im_numba
else:
    im2col = _im2col_numpy
    col2im = _col2im_numpy
