"""On-disk dataset layout for panels, measurements and derived profiles.

::

    <root>/grid.json
    <root>/sweep.f32 (+ .json)
    <root>/panels/<id>/params.json
                      /mesh.obj
                      /ambient.jsonl
                      /index.json
                      /raw/<combo>.f32 (+ .json)
                      /processed/<combo>.f32 (+ .json)
                      /profiles.csv

Writes go through temp-file renames; one writer per panel directory.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DependencyError, FormatError, ParameterError
from .filterbank import BAND_LABELS
from .gridplan import Combination, MeasurementGrid, Symmetry, d4_transforms, symmetry_permutation
from .signals import Environment, Signal, atomic_write_bytes, read_f32, write_f32

REFERENCE_LABELS = ("Wood", "Flat", "Foam", "2D-PRD")
PANEL_ID = re.compile(r"^\d{4}_[01]$")


def valid_panel_id(pid: str) -> bool:
    return bool(PANEL_ID.match(pid)) or pid in REFERENCE_LABELS


@dataclass(eq=False)
class PanelRecord:
    panel_id: str
    reference_label: str | None = None
    params: dict | None = None
    mesh_obj: bytes | None = None
    raw: dict = field(default_factory=dict)  # combo key -> Signal
    processed: dict = field(default_factory=dict)
    ambient: list = field(default_factory=list)  # [(timestamp, Environment)]
    profiles: dict = field(default_factory=dict)  # combo key -> 5 TNCE values
    missing: set = field(default_factory=set)  # combo keys whose files are absent

    def __post_init__(self):
        if not valid_panel_id(self.panel_id):
            raise ParameterError(f"bad panel id {self.panel_id!r}")
        if self.reference_label is not None and self.reference_label not in REFERENCE_LABELS:
            raise ParameterError(f"unknown reference label {self.reference_label!r}")
        if self.panel_id in REFERENCE_LABELS and self.reference_label is None:
            self.reference_label = self.panel_id

    def __eq__(self, other):
        if not isinstance(other, PanelRecord):
            return NotImplemented
        prof_eq = self.profiles.keys() == other.profiles.keys() and all(
            np.array_equal(self.profiles[k], other.profiles[k]) for k in self.profiles)
        return (self.panel_id == other.panel_id
                and self.reference_label == other.reference_label
                and self.params == other.params
                and self.mesh_obj == other.mesh_obj
                and self.raw == other.raw
                and self.processed == other.processed
                and self.ambient == other.ambient
                and prof_eq
                and self.missing == other.missing)

    def environment_at(self, t: float) -> Environment:
        """Ambient record nearest in time to ``t``."""
        if not self.ambient:
            return Environment()
        ts = np.array([a[0] for a in self.ambient], dtype=float)
        return self.ambient[int(np.argmin(np.abs(ts - t)))][1]


def panel_dir(root, pid) -> Path:
    return Path(root) / "panels" / pid


def save_grid(root, grid: MeasurementGrid):
    atomic_write_bytes(Path(root) / "grid.json", grid.to_json().encode())


def load_grid(root) -> MeasurementGrid:
    p = Path(root) / "grid.json"
    try:
        return MeasurementGrid.from_dict(json.loads(p.read_text()))
    except FileNotFoundError:
        raise FormatError(f"no grid.json under {root}") from None
    except (json.JSONDecodeError, KeyError) as e:
        raise FormatError(f"corrupt grid.json: {e}") from None


def profiles_csv(profiles: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["combination"] + [f"tnce_{b}" for b in BAND_LABELS] + ["total"])
    for key in sorted(profiles):
        v = np.asarray(profiles[key], dtype=float)
        w.writerow([key] + [repr(float(x)) for x in v] + [repr(float(v.sum()))])
    return buf.getvalue()


def read_profiles_csv(text: str) -> dict:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][0] != "combination" or len(rows[0]) != len(BAND_LABELS) + 2:
        raise FormatError("profiles.csv header does not match")
    return {r[0]: np.array([float(x) for x in r[1:1 + len(BAND_LABELS)]]) for r in rows[1:] if r}


def save_panel(root, record: PanelRecord) -> Path:
    d = panel_dir(root, record.panel_id)
    d.mkdir(parents=True, exist_ok=True)
    meta = {"panel_id": record.panel_id, "reference_label": record.reference_label,
            "params": record.params}
    atomic_write_bytes(d / "params.json", json.dumps(meta, indent=1, sort_keys=True).encode())
    if record.mesh_obj is not None:
        atomic_write_bytes(d / "mesh.obj", record.mesh_obj)
    lines = [json.dumps({"t": t, **env.to_dict()}, sort_keys=True) for t, env in record.ambient]
    atomic_write_bytes(d / "ambient.jsonl", ("\n".join(lines) + "\n" if lines else "").encode())
    for key, sig in record.raw.items():
        write_f32(d / "raw" / f"{key}.f32", sig)
    for key, sig in record.processed.items():
        write_f32(d / "processed" / f"{key}.f32", sig)
    index = {"raw": sorted(set(record.raw) | {k for k in record.missing}),
             "processed": sorted(record.processed)}
    atomic_write_bytes(d / "index.json", json.dumps(index, indent=1).encode())
    if record.profiles:
        atomic_write_bytes(d / "profiles.csv", profiles_csv(record.profiles).encode())
    return d


def _load_signals(d: Path, keys, missing: set) -> dict:
    out = {}
    for key in keys:
        p = d / f"{key}.f32"
        if not p.exists():
            missing.add(key)
            continue
        out[key] = read_f32(p)
    return out


def load_panel(root, panel_id: str) -> PanelRecord:
    d = panel_dir(root, panel_id)
    if not d.is_dir():
        raise FormatError(f"no panel {panel_id!r} under {root}")
    try:
        meta = json.loads((d / "params.json").read_text())
        index = json.loads((d / "index.json").read_text())
    except FileNotFoundError as e:
        raise FormatError(f"panel {panel_id}: {e.filename} missing") from None
    except json.JSONDecodeError as e:
        raise FormatError(f"panel {panel_id}: corrupt sidecar ({e})") from None
    missing: set = set()
    raw = _load_signals(d / "raw", index.get("raw", []), missing)
    processed = _load_signals(d / "processed", index.get("processed", []), missing)
    ambient = []
    amb = d / "ambient.jsonl"
    if amb.exists():
        for line in amb.read_text().splitlines():
            if line.strip():
                rec = json.loads(line)
                t = rec.pop("t")
                ambient.append((t, Environment.from_dict(rec)))
    mesh = (d / "mesh.obj").read_bytes() if (d / "mesh.obj").exists() else None
    prof = read_profiles_csv((d / "profiles.csv").read_text()) if (d / "profiles.csv").exists() else {}
    return PanelRecord(meta["panel_id"], meta.get("reference_label"), meta.get("params"), mesh,
                       raw, processed, ambient, prof, missing)


def list_panels(root) -> list[str]:
    base = Path(root) / "panels"
    if not base.is_dir():
        return []
    return sorted(p.name for p in base.iterdir() if p.is_dir())


def require_reference(root, label: str) -> PanelRecord:
    if label not in list_panels(root):
        raise DependencyError(f"reference panel {label} missing under {root}")
    return load_panel(root, label)


@dataclass(frozen=True)
class AugmentedView:
    """A symmetry-transformed view of a stored panel; signals are shared, not copied."""

    base_id: str
    symmetry: Symmetry
    mapping: dict  # stored combo key -> combo key in this view

    def remap(self, values: dict) -> dict:
        return {self.mapping[k]: v for k, v in values.items() if k in self.mapping}


def augment(record: PanelRecord, grid: MeasurementGrid) -> list[AugmentedView]:
    keys = set(record.raw) | set(record.processed) | set(record.profiles)
    views = []
    for g in d4_transforms():
        perm = symmetry_permutation(g, grid)
        mapping = {}
        for k in sorted(keys):
            c = Combination.from_key(k)
            mapping[k] = Combination.of(perm[c.a], perm[c.b]).key
        views.append(AugmentedView(record.panel_id, g, mapping))
    return views


def verify_dataset(root) -> dict:
    """Check layout invariants; returns ``{"ok": bool, "issues": [...]}``."""
    issues = []
    try:
        grid = load_grid(root)
        n = len(grid)
    except FormatError as e:
        return {"ok": False, "issues": [str(e)], "panels": []}
    panels = list_panels(root)
    for pid in panels:
        if not valid_panel_id(pid):
            issues.append(f"{pid}: invalid panel id")
            continue
        try:
            rec = load_panel(root, pid)
        except FormatError as e:
            issues.append(f"{pid}: {e}")
            continue
        for key in sorted(set(rec.raw) | set(rec.processed) | set(rec.profiles) | rec.missing):
            try:
                c = Combination.from_key(key)
                if c.b >= n:
                    raise ValueError
            except (ValueError, ParameterError):
                issues.append(f"{pid}: combination {key} not in grid")
        for key in sorted(rec.missing):
            issues.append(f"{pid}: missing data for {key}")
        if rec.processed and "Foam" not in panels:
            issues.append(f"{pid}: processed data present but Foam reference absent")
        if rec.profiles and "Flat" not in panels:
            issues.append(f"{pid}: profiles present but Flat reference absent")
    return {"ok": not issues, "issues": issues, "panels": panels}


# --- streaming access, for panels too large to hold in memory ---------------

def read_index(root, panel_id: str) -> dict:
    p = panel_dir(root, panel_id) / "index.json"
    try:
        return json.loads(p.read_text())
    except FileNotFoundError:
        raise FormatError(f"panel {panel_id}: index.json missing") from None
    except json.JSONDecodeError as e:
        raise FormatError(f"panel {panel_id}: corrupt index ({e})") from None


def read_entry(root, panel_id: str, stage: str, key: str) -> Signal:
    p = panel_dir(root, panel_id) / stage / f"{key}.f32"
    if not p.exists():
        raise DependencyError(f"panel {panel_id}: no {stage} data for {key}")
    return read_f32(p)


class PanelWriter:
    """Writes one panel's signals as they arrive; the index is written on close."""

    def __init__(self, root, record: PanelRecord):
        self.root = root
        self.record = record
        self.keys = {"raw": set(), "processed": set()}
        d = panel_dir(root, record.panel_id)
        if (d / "index.json").exists():
            old = read_index(root, record.panel_id)
            for stage in self.keys:
                self.keys[stage].update(old.get(stage, []))
        save_panel(root, record)
        for stage in self.keys:
            self.keys[stage].update(getattr(record, stage))

    def add(self, stage: str, key: str, signal: Signal):
        write_f32(panel_dir(self.root, self.record.panel_id) / stage / f"{key}.f32", signal)
        self.keys[stage].add(key)

    def close(self):
        index = {s: sorted(k) for s, k in self.keys.items()}
        d = panel_dir(self.root, self.record.panel_id)
        atomic_write_bytes(d / "index.json", json.dumps(index, indent=1).encode())

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
