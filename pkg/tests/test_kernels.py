import numpy as np
import pytest

from echopanel import _kernels_py, kernels
from echopanel.sigproc import resampling_filter


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("up,down", [(3, 2), (983, 1000), (1017, 1000), (1, 1)])
def test_resampler_backends_agree(up, down, rng):
    x = rng.standard_normal(700)
    h = resampling_filter(up, down)
    n_out = 650
    a = np.asarray(kernels.polyphase_resample(x, h, up, down, 32 * up, n_out))
    b = _kernels_py.polyphase_resample(x, h, up, down, 32 * up, n_out)
    assert np.allclose(a, b, atol=1e-12)


def test_rasterizer_backends_agree(rng):
    n = 12
    args = (rng.uniform(-200, 200, n), rng.uniform(-200, 200, n), rng.uniform(5, 80, n),
            rng.uniform(2, 40, n), rng.uniform(-3, 3, n))
    args = (args[0], args[1], np.maximum(args[2], args[3]), np.minimum(args[2], args[3]), args[4])
    a = np.asarray(kernels.rasterize_ellipses(*args, -292.5, -292.5, 2.5, 234, 234))
    b = _kernels_py.rasterize_ellipses(*args, -292.5, -292.5, 2.5, 234, 234)
    assert np.array_equal(a, b)


def test_fallback_selected_by_env():
    import os
    import subprocess
    import sys
    env = {**os.environ, "ECHOPANEL_PURE_PYTHON": "1"}
    out = subprocess.run([sys.executable, "-c", "import echopanel; print(echopanel.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
