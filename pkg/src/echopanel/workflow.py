"""Batch steps over a dataset root: processing, profiles and comparison tables."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import energetics as en
from .errors import DependencyError, FormatError
from .filterbank import FilterBank, apply, build_filterbank
from .signals import Environment, Signal, atomic_write_bytes, read_f32
from .sigproc import Deconvolver, deconvolution_length, process_pipeline
from .store import (PanelRecord, PanelWriter, list_panels, load_panel, panel_dir, profiles_csv,
                    read_entry, read_index, require_reference)


def _map(fn, items, threads=1):
    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def read_sweep(root) -> Signal:
    p = Path(root) / "sweep.f32"
    if not p.exists():
        raise DependencyError(f"no sweep.f32 under {root}")
    return read_f32(p)


def process_record(record: PanelRecord, foam: PanelRecord, sweep: Signal, threads=1) -> dict:
    """Raw recordings to cropped reflection IRs, keyed like ``record.raw``."""
    if not record.raw:
        return {}
    n = deconvolution_length(max(len(s) for s in record.raw.values()), len(sweep))
    dec = Deconvolver.for_sweep(sweep, n)

    def one(key):
        if key not in foam.raw:
            raise DependencyError(f"Foam reference lacks combination {key}")
        env = record.environment_at(record.raw[key].meta.get("timestamp", 0.0))
        ir = process_pipeline(record.raw[key], sweep, foam.raw[key], env, deconvolver=dec)
        return key, ir.with_samples(ir.samples, panel_id=record.panel_id, combination_id=key)

    return dict(_map(one, sorted(record.raw), threads))


def band_energy_profile(ir: Signal, fb: FilterBank, key=None) -> en.EnergyProfile:
    return en.cumulative_energy(apply(fb, ir), key)


def tnce_table(processed: dict, flat_processed: dict, fb: FilterBank | None = None) -> dict:
    """Per combination, the band TNCE vector against the Flat reference."""
    fb = fb or build_filterbank(next(iter(processed.values())).sample_rate)
    out = {}
    for key, ir in processed.items():
        if key not in flat_processed:
            continue
        p = band_energy_profile(ir, fb, key)
        f = band_energy_profile(flat_processed[key], fb, key)
        out[key] = en.normalize(p, f).tnce_bands
    return out


def _batches(items, size):
    for i in range(0, len(items), size):
        yield items[i:i + size]


def process_panel(root, panel_id: str, threads=1, batch=64) -> list[str]:
    """Process every raw recording of a stored panel, streaming from and to disk.

    Returns the processed combination keys. Workers compute in parallel;
    files are written by the calling thread only.
    """
    rec = load_panel_meta(root, panel_id)
    foam_idx = set(read_index(root, "Foam").get("raw", [])) if "Foam" in list_panels(root) else None
    if foam_idx is None:
        raise DependencyError(f"reference panel Foam missing under {root}")
    sweep = read_sweep(root)
    keys = sorted(read_index(root, panel_id).get("raw", []))
    absent = [k for k in keys if k not in foam_idx]
    if absent:
        raise DependencyError(f"Foam reference lacks combination {absent[0]}")
    foam_rec = load_panel_meta(root, "Foam")
    decs: dict = {}

    def one(key):
        raw = read_entry(root, panel_id, "raw", key)
        foam = read_entry(root, "Foam", "raw", key)
        n = deconvolution_length(max(len(raw), len(foam)), len(sweep))
        if n not in decs:
            decs[n] = Deconvolver.for_sweep(sweep, n)
        env = rec.environment_at(raw.meta.get("timestamp", 0.0))
        foam_env = foam_rec.environment_at(foam.meta.get("timestamp", 0.0))
        ir = process_pipeline(raw, sweep, foam, env, deconvolver=decs[n], foam_env=foam_env)
        return key, ir.with_samples(ir.samples, panel_id=panel_id, combination_id=key)

    done = []
    with PanelWriter(root, rec) as w:
        for chunk in _batches(keys, batch):
            for key, ir in _map(one, chunk, threads):
                w.add("processed", key, ir)
                done.append(key)
    return done


def load_panel_meta(root, panel_id: str) -> PanelRecord:
    """Panel record without its signals (params, mesh, ambient, profiles)."""
    d = panel_dir(root, panel_id)
    if not d.is_dir():
        raise FormatError(f"no panel {panel_id!r} under {root}")
    try:
        meta = json.loads((d / "params.json").read_text())
    except FileNotFoundError:
        raise FormatError(f"panel {panel_id}: params.json missing") from None
    except json.JSONDecodeError as e:
        raise FormatError(f"panel {panel_id}: corrupt sidecar ({e})") from None
    ambient = []
    amb = d / "ambient.jsonl"
    if amb.exists():
        for line in amb.read_text().splitlines():
            if line.strip():
                r = json.loads(line)
                t = r.pop("t")
                ambient.append((t, Environment.from_dict(r)))
    mesh = (d / "mesh.obj").read_bytes() if (d / "mesh.obj").exists() else None
    return PanelRecord(meta["panel_id"], meta.get("reference_label"), meta.get("params"), mesh,
                       ambient=ambient)


def profile_panel(root, panel_id: str, fb: FilterBank | None = None) -> dict:
    """TNCE per combination against the stored Flat reference; writes profiles.csv."""
    if "Flat" not in list_panels(root):
        raise DependencyError(f"reference panel Flat missing under {root}")
    flat_keys = set(read_index(root, "Flat").get("processed", []))
    if not flat_keys:
        raise DependencyError("Flat reference has not been processed")
    keys = sorted(read_index(root, panel_id).get("processed", []))
    out = {}
    for key in keys:
        if key not in flat_keys:
            continue
        ir = read_entry(root, panel_id, "processed", key)
        fb = fb or build_filterbank(ir.sample_rate)
        p = band_energy_profile(ir, fb, key)
        f = band_energy_profile(read_entry(root, "Flat", "processed", key), fb, key)
        out[key] = en.normalize(p, f).tnce_bands
    atomic_write_bytes(panel_dir(root, panel_id) / "profiles.csv", profiles_csv(out).encode())
    return out


def read_processed_dir(panel_path) -> dict:
    d = Path(panel_path)
    sub = d / "processed" if (d / "processed").is_dir() else d
    out = {}
    for p in sorted(sub.glob("*.f32")):
        out[p.stem] = read_f32(p)
    if not out:
        raise FormatError(f"no processed impulse responses in {d}")
    return out


def relative_to_flat(profiles: dict, flat_profiles: dict) -> dict:
    """Per-band ratio to the Flat reference, so equal energy maps to 0 dB.

    Combinations absent from Flat, or with a zero Flat band, are dropped.
    """
    out = {}
    for key, v in profiles.items():
        ref = flat_profiles.get(key)
        if ref is None or np.any(np.asarray(ref) <= 0):
            continue
        out[key] = np.asarray(v, dtype=float) / np.asarray(ref, dtype=float)
    return out


def compare_table(profiles_by_panel: dict, p=90.0, aggregate="tail_mean") -> list[dict]:
    """Rows shaped like a percentile comparison: dB per band and for the total."""
    rows = []
    for pid, prof in profiles_by_panel.items():
        vals = np.array(list(prof.values()), dtype=float)
        totals = vals.sum(axis=1)
        if aggregate == "tail_mean":
            bands, tot = en.percentile_mean(vals, p), en.percentile_mean(totals, p)
        else:
            bands, tot = en.percentile_value(vals, p), float(en.percentile_value(totals, p))
        rows.append({"panel": pid, "bands_db": en.to_db(np.asarray(bands)), "total_db": en.to_db(tot)})
    return rows
