"""Numpy implementations of the compiled kernels, used when the extension is absent."""

import numpy as np

_CHUNK = 8192


def polyphase_resample(x, h, up, down, offset, n_out):
    x = np.ascontiguousarray(x, dtype=np.float64)
    h = np.ascontiguousarray(h, dtype=np.float64)
    n_in, L = len(x), len(h)
    out = np.zeros(n_out, dtype=np.float64)
    ntaps = -(-L // up) + 1
    j = np.arange(ntaps)
    for start in range(0, n_out, _CHUNK):
        m = np.arange(start, min(start + _CHUNK, n_out))
        t = m * down + offset
        k_lo = np.maximum(0, -((L - 1 - t) // up))
        k = k_lo[:, None] + j[None, :]
        hidx = t[:, None] - k * up
        valid = (hidx >= 0) & (hidx < L) & (k < n_in) & (t[:, None] >= 0)
        k = np.where(valid, k, 0)
        hidx = np.where(valid, hidx, 0)
        out[m] = np.sum(np.where(valid, x[k] * h[hidx], 0.0), axis=1)
    return out


def rasterize_ellipses(cx, cy, a, b, theta, x0, y0, res, nx, ny):
    counts = np.zeros((ny, nx), dtype=np.int32)
    for e in range(len(cx)):
        c, s = np.cos(theta[e]), np.sin(theta[e])
        r = max(a[e], b[e])
        i0 = max(int(np.floor((cx[e] - r - x0) / res)), 0)
        i1 = min(int(np.ceil((cx[e] + r - x0) / res)), nx)
        j0 = max(int(np.floor((cy[e] - r - y0) / res)), 0)
        j1 = min(int(np.ceil((cy[e] + r - y0) / res)), ny)
        if i0 >= i1 or j0 >= j1:
            continue
        dx = x0 + (np.arange(i0, i1) + 0.5) * res - cx[e]
        dy = y0 + (np.arange(j0, j1) + 0.5) * res - cy[e]
        u = (dx[None, :] * c + dy[:, None] * s) / a[e]
        v = (-dx[None, :] * s + dy[:, None] * c) / b[e]
        counts[j0:j1, i0:i1] += (u * u + v * v <= 1.0)
    return counts
