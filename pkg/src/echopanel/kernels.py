"""Hot loops, backed by the Cython extension when it is importable.

Set ``ECHOPANEL_PURE_PYTHON=1`` to force the numpy fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("ECHOPANEL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        _impl = _kernels_py


def polyphase_resample(x, h, up, down, offset, n_out):
    """``y[m] = sum_k x[k] * h[m*down - k*up + offset]`` over valid filter taps."""
    return _impl.polyphase_resample(x, h, int(up), int(down), int(offset), int(n_out))


def rasterize_ellipses(cx, cy, a, b, theta, x0, y0, res, nx, ny):
    """Count, per raster cell centre, how many ellipses contain it."""
    return _impl.rasterize_ellipses(cx, cy, a, b, theta, float(x0), float(y0),
                                    float(res), int(nx), int(ny))
