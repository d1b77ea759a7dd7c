import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from echopanel import gridplan as gp
from echopanel.errors import ParameterError, SymmetryUnavailableError
from echopanel.kernels import rasterize_ellipses
from echopanel.sigproc import speed_of_sound


@pytest.fixture(scope="module")
def grid():
    return gp.build_grid()


def test_counts(grid):
    assert len(grid) == 78
    assert [grid.layer_size(l) for l in range(4)] == [6, 5, 4, 1]
    assert len(gp.enumerate_combinations(grid)) == 3003
    assert gp.enumerate_combinations(grid, gp.exclude_all) == []


def test_layer_geometry(grid):
    for l, spacing, z in ((0, 75.0, 124.0), (1, 93.75, 214.0), (2, 125.0, 304.0)):
        pts = grid.points[grid.layer_ids(l)]
        xs = np.unique(pts[:, 0])
        assert np.allclose(np.diff(xs), spacing, rtol=0, atol=0)
        assert np.all(pts[:, 2] == z)
        assert xs.mean() == pytest.approx(0.0)
    assert np.array_equal(grid.points[77], [0.0, 0.0, 474.0])
    assert not grid.exceeds_footprint


def test_row_zero_is_positive_y(grid):
    r0 = [i for i in grid.layer_ids(0) if grid.cell(i)[0] == 0]
    assert np.all(grid.points[r0, 1] > 0)


def test_grid_serialisation(grid):
    back = gp.MeasurementGrid.from_dict(grid.to_dict())
    assert np.array_equal(back.points, grid.points)
    assert back.specs == grid.specs
    assert grid.to_csv().count("\n") == 79


def test_footprint_warning():
    with pytest.warns(UserWarning):
        g = gp.build_grid([gp.LayerSpec(6, 100, 150)])
    assert g.exceeds_footprint


def test_jitter_reproducible():
    a = gp.build_grid(jitter=2.0, seed=3)
    b = gp.build_grid(jitter=2.0, seed=3)
    assert np.array_equal(a.points, b.points)
    assert not np.array_equal(a.points, gp.build_grid().points)


def test_combination_keys():
    c = gp.Combination.of(12, 3)
    assert c == (3, 12) and c.key == "03_12"
    assert gp.Combination.from_key(c.key) == c
    with pytest.raises(ParameterError):
        gp.Combination.of(4, 4)


def test_min_clearance(grid):
    ex = gp.min_clearance(80.0)
    kept = gp.enumerate_combinations(grid, ex)
    assert 0 < len(kept) < 3003
    for c in kept:
        assert np.linalg.norm(grid.points[c.a] - grid.points[c.b]) >= 80.0


def test_fresnel_symmetric_case():
    # source and receiver at the same height: zone centred between them
    z = gp.fresnel_zone((-100.0, 0.0, 200.0), (100.0, 0.0, 200.0), 5000.0)
    assert z.center[0] == pytest.approx(0.0, abs=1e-9)
    assert abs(np.cos(z.orientation)) == pytest.approx(1.0)
    assert z.semi_major > z.semi_minor


def test_fresnel_boundary_has_half_wavelength_excess():
    s, r = (-80.0, 30.0, 124.0), (150.0, -60.0, 304.0)
    f = 8000.0
    z = gp.fresnel_zone(s, r, f)
    lam = speed_of_sound(20) * 1000 / f
    b = z.boundary(32)
    assert np.allclose(gp.path_excess(s, r, b[:, 0], b[:, 1]), lam / 2, atol=1e-6)


def test_fresnel_shrinks_with_frequency(grid):
    s, r = grid.points[0], grid.points[40]
    d = [gp.fresnel_zone(s, r, f).minor_diameter for f in (2000, 5000, 20000, 40000)]
    assert all(a > b for a, b in zip(d, d[1:]))


def test_fresnel_rejects_points_below_plane():
    with pytest.raises(ParameterError):
        gp.fresnel_zone((0, 0, -1), (0, 0, 10), 1000)


def test_fresnel_raster_oracle(grid, rng):
    combos = gp.enumerate_combinations(grid)
    res = 1.0
    for k in rng.choice(len(combos), 5, replace=False):
        c = combos[k]
        s, r = grid.points[c.a], grid.points[c.b]
        z = gp.fresnel_zone(s, r, 10000.0)
        lam = speed_of_sound(20) * 1000 / 10000.0
        xs = np.arange(-400, 400, res) + res / 2
        X, Y = np.meshgrid(xs, xs)
        brute = gp.path_excess(s, r, X, Y) <= lam / 2
        closed = z.contains(X, Y)
        # disagreement only along the boundary, within one cell
        assert np.count_nonzero(brute != closed) <= 4 * (z.semi_major + z.semi_minor) / res


def test_coverage_map(grid):
    combos = gp.layer_combinations(grid, gp.enumerate_combinations(grid), 1)
    assert len(combos) == 300
    cov = gp.coverage_map(grid, combos, 40000.0, resolution=5.0)
    assert cov.counts.shape == (117, 117)
    assert 0 < cov.fraction <= 1
    pgm = cov.to_pgm()
    assert pgm.startswith(b"P5\n117 117\n255\n") and len(pgm) == len(b"P5\n117 117\n255\n") + 117 * 117


def test_rasterizer_counts_single_ellipse():
    counts = np.asarray(rasterize_ellipses(np.array([0.0]), np.array([0.0]), np.array([10.0]),
                                           np.array([5.0]), np.array([0.0]), -20.0, -20.0, 0.5, 80, 80))
    assert counts.sum() * 0.25 == pytest.approx(np.pi * 50, rel=0.02)


def test_d4_group_properties(grid):
    G = gp.d4_transforms()
    assert len(G) == 8 and len({g.matrix for g in G}) == 8
    ident = G[0]
    for g, h in itertools.product(G, G):
        assert (g @ h) in G
    for g in G:
        assert g @ g.inverse() == ident
        perm = gp.symmetry_permutation(g, grid)
        assert sorted(perm) == list(range(78))
        assert np.all(grid.layers[perm] == grid.layers)


def test_identity_and_rotation(grid):
    ident, rot90 = gp.d4_transforms()[:2]
    assert np.array_equal(gp.symmetry_permutation(ident, grid), np.arange(78))
    p = gp.apply_symmetry(rot90, np.array([1.0, 0.0, 5.0]))
    assert np.allclose(p, [0.0, 1.0, 5.0])
    assert gp.apply_symmetry(rot90, 77, grid) == 77


def test_asymmetric_grid_raises():
    g = gp.build_grid(jitter=3.0, seed=1)
    with pytest.raises(SymmetryUnavailableError):
        gp.symmetry_permutation(gp.d4_transforms()[1], g)


def test_transform_report_consistent_with_permutation(grid):
    from echopanel.energetics import grid_report
    rng = np.random.default_rng(5)
    mic = 3
    profiles = {gp.Combination.of(mic, j): rng.uniform(0.1, 2, 5) for j in range(78) if j != mic}
    rep = grid_report(profiles, grid, mic)
    for g in gp.d4_transforms():
        perm = gp.symmetry_permutation(g, grid)
        moved = {gp.Combination.of(perm[c.a], perm[c.b]): v for c, v in profiles.items()}
        direct = grid_report(moved, grid, int(perm[mic]))
        via = gp.apply_symmetry(g, rep, grid)
        assert via.microphone_id == direct.microphone_id
        assert via.mic_cell == direct.mic_cell
        for a, b in zip(via.layers, direct.layers):
            assert np.array_equal(np.isnan(a), np.isnan(b))
            assert np.allclose(np.nan_to_num(a), np.nan_to_num(b))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 7), st.integers(0, 7))
def test_composition_matches_permutations(i, j):
    grid = gp.build_grid()
    G = gp.d4_transforms()
    g, h = G[i], G[j]
    pg, ph = gp.symmetry_permutation(g, grid), gp.symmetry_permutation(h, grid)
    assert np.array_equal(gp.symmetry_permutation(g @ h, grid), pg[ph])
