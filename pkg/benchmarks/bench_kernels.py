"""Time the compiled and numpy kernels on the workloads the pipeline runs.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from echopanel import _kernels_py, kernels
from echopanel import gridplan as gp
from echopanel.sigproc import RESAMPLE_HALF_TAPS, resampling_filter, resampling_ratio

try:
    from echopanel import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def resample_case():
    # one deconvolved 1 s IR corrected from 30 degC, as in the processing pipeline
    r = resampling_ratio(30.0)
    x = np.random.default_rng(0).standard_normal(98304)
    h = resampling_filter(r.numerator, r.denominator)
    args = (x, h, r.numerator, r.denominator, RESAMPLE_HALF_TAPS * r.numerator, 4096)
    return "polyphase_resample (4096 outputs, ratio %d/%d)" % (r.numerator, r.denominator), "polyphase_resample", args


def raster_case():
    grid = gp.build_grid()
    combos = gp.layer_combinations(grid, gp.enumerate_combinations(grid), 1)
    zones = gp.combination_zones(grid, combos, 2000.0)
    arr = lambda v: np.ascontiguousarray(v, dtype=np.float64)
    args = (arr([z.center[0] for z in zones]), arr([z.center[1] for z in zones]),
            arr([z.semi_major for z in zones]), arr([z.semi_minor for z in zones]),
            arr([z.orientation for z in zones]), -292.5, -292.5, 1.0, 585, 585)
    return f"rasterize_ellipses ({len(zones)} zones at 2 kHz, 1 mm raster)", "rasterize_ellipses", args


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    print(f"active backend: {kernels.BACKEND}")
    for label, name, a in (resample_case(), raster_case()):
        py = min(timeit.repeat(lambda: getattr(_kernels_py, name)(*a), number=1, repeat=args.repeat))
        line = f"{label}: python {py * 1e3:8.2f} ms"
        if _kernels_c is not None:
            c = min(timeit.repeat(lambda: getattr(_kernels_c, name)(*a), number=1, repeat=args.repeat))
            same = np.allclose(np.asarray(getattr(_kernels_c, name)(*a)), getattr(_kernels_py, name)(*a))
            line += f" | cython {c * 1e3:8.2f} ms | speedup {py / c:5.1f}x | outputs agree {same}"
        else:
            line += " | cython extension not built"
        print(line)


if __name__ == "__main__":
    main()
