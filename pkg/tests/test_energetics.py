import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from echopanel import energetics as en
from echopanel.errors import DegenerateReferenceError, ParameterError
from echopanel.filterbank import BandSignals, apply, build_filterbank
from echopanel.gridplan import Combination, build_grid
from echopanel.signals import Signal

FLAT = (0.092, 0.216, 0.169, 0.309, 0.213)
P0072 = (0.136, 0.291, 0.169, 0.157, 0.106)


def _bands(arr):
    return BandSignals(tuple(Signal(r, 96000, "impulse_response") for r in arr))


def test_unit_impulse_curve():
    arr = np.zeros((5, 20))
    arr[2, 10] = 1.0
    prof = en.cumulative_energy(_bands(arr))
    assert np.all(prof.band_curves[2, :10] == 0) and np.all(prof.band_curves[2, 10:] == 1)
    assert prof.total == 1.0


def test_zero_profile():
    prof = en.cumulative_energy(_bands(np.zeros((5, 8))))
    assert prof.total == 0
    ref = en.cumulative_energy(_bands(np.ones((5, 8))))
    assert np.all(en.normalize(prof, ref).tnce_bands == 0)


def test_random_signal_total_matches_energy(rng):
    x = rng.standard_normal(384)
    prof = en.cumulative_energy(apply(build_filterbank(), Signal(x, 96000, "impulse_response")))
    assert prof.total == pytest.approx(np.dot(x, x), rel=1e-6)
    assert np.all(np.diff(prof.band_curves, axis=1) >= 0)


def test_normalize_self_and_scaling(rng):
    arr = rng.standard_normal((5, 50))
    flat = en.cumulative_energy(_bands(arr))
    n = en.normalize(flat, flat)
    assert n.tnce_total == pytest.approx(1.0)
    two = en.cumulative_energy(_bands(np.sqrt(2) * arr))
    assert en.normalize(two, flat).tnce_total == pytest.approx(2.0)


def test_normalize_errors():
    a = en.cumulative_energy(_bands(np.ones((5, 4))), "00_01")
    b = en.cumulative_energy(_bands(np.ones((5, 4))), "00_02")
    with pytest.raises(ParameterError):
        en.normalize(a, b)
    z = en.cumulative_energy(_bands(np.zeros((5, 4))), "00_01")
    with pytest.raises(DegenerateReferenceError):
        en.normalize(a, z)


def test_band_difference_table_values():
    p = en.NormalizedProfile.from_tnce(P0072)
    r = en.NormalizedProfile.from_tnce(FLAT)
    bands, total = en.band_difference(p, r)
    assert np.allclose(bands, [47.8, 34.7, 0.0, -49.2, -50.2], atol=0.1)
    assert total == pytest.approx(-14.1, abs=0.5)


def test_band_difference_trivial():
    r = en.NormalizedProfile.from_tnce(FLAT)
    assert np.allclose(en.band_difference(r, r)[0], 0)
    p = en.NormalizedProfile.from_tnce(1.5 * np.array(FLAT))
    assert np.allclose(en.band_difference(p, r)[0], 50)
    z = en.NormalizedProfile.from_tnce([0, 1, 1, 1, 1])
    assert np.isnan(en.band_difference(r, z)[0][0])


def test_to_db():
    assert en.to_db(1.0) == 0.0
    assert en.to_db(1.67) == pytest.approx(2.23, abs=0.01)
    assert en.to_db(0.0) == -np.inf
    assert en.clamp_db(en.to_db(0.0)) == -20
    with pytest.raises(ParameterError):
        en.to_db(-1.0)


def test_percentile_mean_upper_tail():
    v = np.arange(1, 101, dtype=float)
    # P90 by linear interpolation is 90.1, so the tail is 91..100
    assert en.percentile_mean(v, 90) == pytest.approx(95.5)
    assert en.percentile_value(v, 90) == pytest.approx(90.1)
    cols = np.stack([v, 2 * v], axis=1)
    assert np.allclose(en.percentile_mean(cols, 90), [95.5, 191.0])
    with pytest.raises(ParameterError):
        en.percentile_mean([], 90)


def test_diffuseness_time():
    arr = np.zeros((5, 100))
    arr[0, 10] = 1
    arr[0, 30] = 1
    prof = en.cumulative_energy(_bands(arr))
    t = en.diffuseness_time(prof, 0.5)
    assert t[0] == pytest.approx(10 / 96000)
    assert np.isnan(t[1])


def test_grid_report_shapes_and_markers():
    grid = build_grid()
    mic = 7
    profiles = {Combination.of(mic, j): np.ones(5) for j in range(len(grid)) if j not in (mic, 0)}
    rep = en.grid_report(profiles, grid, mic)
    assert [l.shape for l in rep.layers] == [(5, 6, 6), (5, 5, 5), (5, 4, 4)]
    assert rep.mic_cell == (0,) + grid.cell(mic)
    r0, c0 = grid.cell(0)
    assert rep.no_data[0][r0, c0]
    assert np.nansum(np.abs(rep.layers[1])) == 0


def test_grid_report_mean_aggregate():
    grid = build_grid()
    profiles = {Combination(0, 1): np.full(5, 2.0), Combination(0, 2): np.full(5, 4.0)}
    rep = en.grid_report(profiles, grid, None, aggregate="mean")
    r, c = grid.cell(0)
    assert rep.layers[0][0, r, c] == pytest.approx(en.to_db(3.0))
    assert rep.mic_cell is None


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 10.0))
def test_scale_equivariance(alpha):
    rng = np.random.default_rng(7)
    arr = rng.standard_normal((5, 40))
    flat = en.cumulative_energy(_bands(arr))
    p = en.cumulative_energy(_bands(alpha * arr))
    n = en.normalize(p, flat)
    assert n.tnce_total == pytest.approx(alpha**2, rel=1e-9)
    assert en.to_db(n.tnce_total) == pytest.approx(20 * np.log10(alpha), abs=1e-9)
