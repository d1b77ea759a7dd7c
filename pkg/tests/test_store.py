import json

import numpy as np
import pytest

from echopanel import store
from echopanel.errors import DependencyError, FormatError, ParameterError, SymmetryUnavailableError
from echopanel.gridplan import Combination, build_grid, d4_transforms
from echopanel.signals import Environment, Signal


def _record(pid="0007_1", n=4, seed=0):
    rng = np.random.default_rng(seed)
    raw = {Combination(0, j).key: Signal(rng.standard_normal(32).astype(np.float32), 96000, "recording",
                                         {"combination_id": Combination(0, j).key})
           for j in range(1, n + 1)}
    return store.PanelRecord(pid, params={"typology": "flemish_bond"}, mesh_obj=b"v 0 0 0\n", raw=raw,
                             ambient=[(0.0, Environment(21.0)), (60.0, Environment(23.0))],
                             profiles={k: rng.uniform(0, 1, 5) for k in raw})


def test_roundtrip(tmp_path):
    store.save_grid(tmp_path, build_grid())
    rec = _record()
    store.save_panel(tmp_path, rec)
    assert store.load_panel(tmp_path, rec.panel_id) == rec


def test_missing_file_is_flagged(tmp_path):
    rec = _record()
    d = store.save_panel(tmp_path, rec)
    (d / "raw" / "00_02.f32").unlink()
    back = store.load_panel(tmp_path, rec.panel_id)
    assert back.missing == {"00_02"}
    assert "00_02" not in back.raw


def test_corrupt_sidecar(tmp_path):
    d = store.save_panel(tmp_path, _record())
    (d / "index.json").write_text("{")
    with pytest.raises(FormatError):
        store.load_panel(tmp_path, "0007_1")


def test_reference_panel():
    foam = store.PanelRecord("Foam")
    assert foam.reference_label == "Foam" and foam.params is None
    with pytest.raises(ParameterError):
        store.PanelRecord("bad-id")


def test_require_reference(tmp_path):
    with pytest.raises(DependencyError):
        store.require_reference(tmp_path, "Flat")


def test_environment_lookup():
    rec = _record()
    assert rec.environment_at(10).temperature_c == 21.0
    assert rec.environment_at(50).temperature_c == 23.0


def test_augment_counts_and_invariance():
    grid = build_grid()
    rec = _record(n=10)
    views = store.augment(rec, grid)
    assert len(views) == 8
    assert all(k == v for k, v in views[0].mapping.items())
    entries = {(v.symmetry.name, k) for v in views for k in v.mapping.values()}
    assert len(entries) == 8 * len(rec.raw)
    base = sorted(tuple(v) for v in rec.profiles.values())
    for v in views:
        assert sorted(tuple(x) for x in v.remap(rec.profiles).values()) == base


def test_augment_needs_symmetric_grid():
    with pytest.raises(SymmetryUnavailableError):
        store.augment(_record(), build_grid(jitter=2.0, seed=1))


def test_verify(tmp_path):
    assert not store.verify_dataset(tmp_path)["ok"]
    store.save_grid(tmp_path, build_grid())
    store.save_panel(tmp_path, _record())
    res = store.verify_dataset(tmp_path)
    assert not res["ok"]  # profiles present without a Flat reference
    store.save_panel(tmp_path, store.PanelRecord("Flat"))
    assert store.verify_dataset(tmp_path)["ok"]
    bad = _record("0008_0")
    bad.raw["00_99"] = bad.raw.pop("00_01")
    store.save_panel(tmp_path, bad)
    issues = store.verify_dataset(tmp_path)["issues"]
    assert any("00_99" in i for i in issues)


def test_panel_writer_streams(tmp_path):
    rec = store.PanelRecord("0009_0")
    with store.PanelWriter(tmp_path, rec) as w:
        w.add("raw", "00_01", Signal(np.ones(4, dtype=np.float32)))
        w.add("processed", "00_01", Signal(np.ones(4, dtype=np.float32), kind="impulse_response"))
    idx = json.loads((store.panel_dir(tmp_path, "0009_0") / "index.json").read_text())
    assert idx == {"raw": ["00_01"], "processed": ["00_01"]}
    with store.PanelWriter(tmp_path, rec) as w:
        w.add("raw", "00_02", Signal(np.ones(4, dtype=np.float32)))
    assert store.read_index(tmp_path, "0009_0")["raw"] == ["00_01", "00_02"]
