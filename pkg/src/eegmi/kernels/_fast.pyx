# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: valid 2-D cross-correlation, non-overlapping max pool,
and the second-order-section IIR cascade.  Loop orders are fixed so results
are deterministic regardless of thread count (each output element is
accumulated by exactly one thread, in index order)."""

import numpy as np

from cython.parallel cimport prange


def conv2d_forward(double[:, :, :, ::1] x, double[:, :, :, ::1] w,
                   double[::1] bias, int sh, int sw):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t F = w.shape[0], KH = w.shape[2], KW = w.shape[3]
    cdef Py_ssize_t OH = (H - KH) // sh + 1, OW = (W - KW) // sw + 1
    y_arr = np.empty((B, F, OH, OW), dtype=np.float64)
    cdef double[:, :, :, ::1] y = y_arr
    cdef Py_ssize_t b, f, oh, ow, c, kh, kw
    cdef double acc
    for b in prange(B, nogil=True, schedule='static'):
        for f in range(F):
            for oh in range(OH):
                for ow in range(OW):
                    acc = bias[f]
                    for c in range(C):
                        for kh in range(KH):
                            for kw in range(KW):
                                acc = acc + x[b, c, oh * sh + kh, ow * sw + kw] * w[f, c, kh, kw]
                    y[b, f, oh, ow] = acc
    return y_arr


def conv2d_backward(double[:, :, :, ::1] x, double[:, :, :, ::1] w,
                    int sh, int sw, double[:, :, :, ::1] dy):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t F = w.shape[0], KH = w.shape[2], KW = w.shape[3]
    cdef Py_ssize_t OH = dy.shape[2], OW = dy.shape[3]
    dx_arr = np.zeros((B, C, H, W), dtype=np.float64)
    dw_arr = np.zeros((F, C, KH, KW), dtype=np.float64)
    db_arr = np.zeros(F, dtype=np.float64)
    cdef double[:, :, :, ::1] dx = dx_arr
    cdef double[:, :, :, ::1] dw = dw_arr
    cdef double[::1] db = db_arr
    cdef Py_ssize_t b, f, oh, ow, c, kh, kw
    cdef double g, acc

    # dx: parallel over batch, each b owned by one thread
    for b in prange(B, nogil=True, schedule='static'):
        for f in range(F):
            for oh in range(OH):
                for ow in range(OW):
                    g = dy[b, f, oh, ow]
                    for c in range(C):
                        for kh in range(KH):
                            for kw in range(KW):
                                dx[b, c, oh * sh + kh, ow * sw + kw] += g * w[f, c, kh, kw]

    # dw/db: parallel over filters, each f owned by one thread
    for f in prange(F, nogil=True, schedule='static'):
        acc = 0.0
        for b in range(B):
            for oh in range(OH):
                for ow in range(OW):
                    g = dy[b, f, oh, ow]
                    acc = acc + g
                    for c in range(C):
                        for kh in range(KH):
                            for kw in range(KW):
                                dw[f, c, kh, kw] += g * x[b, c, oh * sh + kh, ow * sw + kw]
        db[f] = acc
    return dx_arr, dw_arr, db_arr


def maxpool_forward(double[:, :, :, ::1] x, int ph, int pw):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t OH = H // ph, OW = W // pw
    y_arr = np.empty((B, C, OH, OW), dtype=np.float64)
    idx_arr = np.empty((B, C, OH, OW), dtype=np.int64)
    cdef double[:, :, :, ::1] y = y_arr
    cdef long long[:, :, :, ::1] idx = idx_arr
    cdef Py_ssize_t b, c, oh, ow, i, j, best
    cdef double best_val, v
    for b in prange(B, nogil=True, schedule='static'):
        for c in range(C):
            for oh in range(OH):
                for ow in range(OW):
                    best = 0
                    best_val = x[b, c, oh * ph, ow * pw]
                    for i in range(ph):
                        for j in range(pw):
                            v = x[b, c, oh * ph + i, ow * pw + j]
                            if v > best_val:
                                best_val = v
                                best = i * pw + j
                    y[b, c, oh, ow] = best_val
                    idx[b, c, oh, ow] = best
    return y_arr, idx_arr


def maxpool_backward(long long[:, :, :, ::1] idx, double[:, :, :, ::1] dy,
                     int ph, int pw, int h, int w):
    cdef Py_ssize_t B = dy.shape[0], C = dy.shape[1], OH = dy.shape[2], OW = dy.shape[3]
    dx_arr = np.zeros((B, C, h, w), dtype=np.float64)
    cdef double[:, :, :, ::1] dx = dx_arr
    cdef Py_ssize_t b, c, oh, ow
    cdef long long k
    for b in prange(B, nogil=True, schedule='static'):
        for c in range(C):
            for oh in range(OH):
                for ow in range(OW):
                    k = idx[b, c, oh, ow]
                    dx[b, c, oh * ph + k // pw, ow * pw + k % pw] += dy[b, c, oh, ow]
    return dx_arr


def sosfilt(double[:, ::1] sos, x):
    cdef double[:, ::1] y
    y_arr = np.array(x, dtype=np.float64, copy=True, order='C')
    y = y_arr
    cdef Py_ssize_t C = y.shape[0], N = y.shape[1], S = sos.shape[0]
    cdef Py_ssize_t c, s, t
    cdef double b0, b1, b2, a1, a2, s1, s2, xt, yt
    for c in prange(C, nogil=True, schedule='static'):
        for s in range(S):
            b0 = sos[s, 0]; b1 = sos[s, 1]; b2 = sos[s, 2]
            a1 = sos[s, 4]; a2 = sos[s, 5]
            s1 = 0.0
            s2 = 0.0
            for t in range(N):
                xt = y[c, t]
                yt = b0 * xt + s1
                s1 = b1 * xt - a1 * yt + s2
                s2 = b2 * xt - a2 * yt
                y[c, t] = yt
    return y_arr
