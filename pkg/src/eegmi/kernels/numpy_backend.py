"""Pure-numpy fallback for the hot kernels.

Convolution goes through im2col + GEMM; the IIR cascade loops over time
with all channels advanced per step.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _cols(x, kh, kw, sh, sw):
    # (B, C, OH, OW, KH, KW) view, no copy
    windows = sliding_window_view(x, (kh, kw), axis=(2, 3))
    return windows[:, :, ::sh, ::sw, :, :]


def conv2d_forward(x, w, bias, sh, sw):
    """Valid cross-correlation. x:(B,C,H,W), w:(F,C,KH,KW), bias:(F,) -> (B,F,OH,OW)."""
    f, c, kh, kw = w.shape
    cols = _cols(x, kh, kw, sh, sw)
    b, _, oh, ow = cols.shape[:4]
    # (B*OH*OW, C*KH*KW) @ (C*KH*KW, F)
    mat = cols.transpose(0, 2, 3, 1, 4, 5).reshape(b * oh * ow, c * kh * kw)
    y = mat @ w.reshape(f, c * kh * kw).T + bias
    return np.ascontiguousarray(y.reshape(b, oh, ow, f).transpose(0, 3, 1, 2))


def conv2d_backward(x, w, sh, sw, dy):
    """Gradients of conv2d_forward w.r.t. input, weights, bias."""
    f, c, kh, kw = w.shape
    b, _, oh, ow = dy.shape
    cols = _cols(x, kh, kw, sh, sw)
    mat = cols.transpose(0, 2, 3, 1, 4, 5).reshape(b * oh * ow, c * kh * kw)
    dy_mat = dy.transpose(0, 2, 3, 1).reshape(b * oh * ow, f)

    db = dy_mat.sum(axis=0)
    dw = (dy_mat.T @ mat).reshape(f, c, kh, kw)

    dx = np.zeros_like(x)
    dcols = (dy_mat @ w.reshape(f, c * kh * kw)).reshape(b, oh, ow, c, kh, kw)
    for i in range(kh):
        for j in range(kw):
            dx[:, :, i:i + sh * oh:sh, j:j + sw * ow:sw] += \
                dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return dx, dw, db


def maxpool_forward(x, ph, pw):
    """Non-overlapping max pool; returns (y, argmax) with within-window flat indices.

    Ties resolve to the first element in row-major window order.
    """
    b, c, h, w = x.shape
    oh, ow = h // ph, w // pw
    windows = (x.reshape(b, c, oh, ph, ow, pw)
                .transpose(0, 1, 2, 4, 3, 5)
                .reshape(b, c, oh, ow, ph * pw))
    idx = windows.argmax(axis=-1)
    y = np.take_along_axis(windows, idx[..., np.newaxis], axis=-1)[..., 0]
    return np.ascontiguousarray(y), idx.astype(np.int64)


def maxpool_backward(idx, dy, ph, pw, h, w):
    """Route upstream gradient to each window's argmax position."""
    b, c, oh, ow = dy.shape
    dwin = np.zeros((b, c, oh, ow, ph * pw), dtype=dy.dtype)
    np.put_along_axis(dwin, idx[..., np.newaxis], dy[..., np.newaxis], axis=-1)
    dx = (dwin.reshape(b, c, oh, ow, ph, pw)
              .transpose(0, 1, 2, 4, 3, 5)
              .reshape(b, c, oh * ph, ow * pw))
    if oh * ph != h or ow * pw != w:
        full = np.zeros((b, c, h, w), dtype=dy.dtype)
        full[:, :, :oh * ph, :ow * pw] = dx
        return full
    return np.ascontiguousarray(dx)


def sosfilt(sos, x):
    """Cascade of direct-form-II-transposed biquads over each row of x (C, n)."""
    y = np.array(x, dtype=np.float64, copy=True)
    n = y.shape[1]
    for b0, b1, b2, _a0, a1, a2 in sos:
        s1 = np.zeros(y.shape[0])
        s2 = np.zeros(y.shape[0])
        for t in range(n):
            xt = y[:, t]
            yt = b0 * xt + s1
            s1 = b1 * xt - a1 * yt + s2
            s2 = b2 * xt - a2 * yt
            y[:, t] = yt
    return y
