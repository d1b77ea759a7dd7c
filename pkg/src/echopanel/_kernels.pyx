# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: polyphase resampling and ellipse rasterization."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, floor, ceil

cnp.import_array()


def polyphase_resample(const double[::1] x, const double[::1] h, long up, long down,
                       long offset, long n_out):
    cdef long n_in = x.shape[0]
    cdef long L = h.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(n_out, dtype=np.float64)
    cdef double[::1] y = out
    cdef long m, k, k_lo, k_hi, t
    cdef double acc
    for m in range(n_out):
        t = m * down + offset
        if t < 0:
            continue
        k_hi = t // up
        if k_hi > n_in - 1:
            k_hi = n_in - 1
        k_lo = t - L + 1
        if k_lo <= 0:
            k_lo = 0
        else:
            k_lo = (k_lo + up - 1) // up
        acc = 0.0
        for k in range(k_lo, k_hi + 1):
            acc = acc + x[k] * h[t - k * up]
        y[m] = acc
    return out


def rasterize_ellipses(const double[::1] cx, const double[::1] cy,
                       const double[::1] a, const double[::1] b,
                       const double[::1] theta, double x0, double y0,
                       double res, long nx, long ny):
    cdef cnp.ndarray[cnp.int32_t, ndim=2] out = np.zeros((ny, nx), dtype=np.int32)
    cdef int[:, ::1] counts = out
    cdef long e, i, j, i0, i1, j0, j1
    cdef double c, s, r, px, py, dx, dy, u, v
    for e in range(cx.shape[0]):
        c = cos(theta[e])
        s = sin(theta[e])
        r = a[e] if a[e] > b[e] else b[e]
        i0 = <long>floor((cx[e] - r - x0) / res)
        i1 = <long>ceil((cx[e] + r - x0) / res)
        j0 = <long>floor((cy[e] - r - y0) / res)
        j1 = <long>ceil((cy[e] + r - y0) / res)
        if i0 < 0:
            i0 = 0
        if j0 < 0:
            j0 = 0
        if i1 > nx:
            i1 = nx
        if j1 > ny:
            j1 = ny
        for j in range(j0, j1):
            py = y0 + (j + 0.5) * res
            dy = py - cy[e]
            for i in range(i0, i1):
                px = x0 + (i + 0.5) * res
                dx = px - cx[e]
                u = (dx * c + dy * s) / a[e]
                v = (-dx * s + dy * c) / b[e]
                if u * u + v * v <= 1.0:
                    counts[j, i] += 1
    return out
