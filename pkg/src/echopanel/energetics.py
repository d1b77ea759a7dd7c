"""Cumulative energy, normalisation against the Flat reference, and aggregates."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import DegenerateReferenceError, ParameterError
from .filterbank import BAND_LABELS, BandSignals

DB_FLOOR = -20.0
DB_CEIL = 6.0


@dataclass(frozen=True, eq=False)
class EnergyProfile:
    band_curves: np.ndarray  # (5, n) nondecreasing
    sample_rate: float
    combination_id: object = None
    labels: tuple = BAND_LABELS

    @property
    def band_totals(self) -> np.ndarray:
        return self.band_curves[:, -1].copy()

    @property
    def total(self) -> float:
        return float(np.sum(self.band_curves[:, -1]))


@dataclass(frozen=True, eq=False)
class NormalizedProfile(EnergyProfile):
    @property
    def tnce_bands(self) -> np.ndarray:
        return self.band_totals

    @property
    def tnce_total(self) -> float:
        return self.total

    @classmethod
    def from_tnce(cls, tnce_bands, combination_id=None, sample_rate=96000.0):
        """A single-sample profile carrying only the final TNCE values."""
        v = np.asarray(tnce_bands, dtype=float).reshape(-1, 1)
        return cls(v, sample_rate, combination_id)


def cumulative_energy(bands: BandSignals, combination_id=None) -> EnergyProfile:
    """``curve_k[t] = sum_{tau <= t} h_k(tau)**2`` for each band."""
    x = bands.as_array().astype(np.float64)
    return EnergyProfile(np.cumsum(x * x, axis=1), bands.sample_rate, combination_id,
                         tuple(bands.labels))


def normalize(profile: EnergyProfile, flat_profile: EnergyProfile) -> NormalizedProfile:
    """Divide every curve by the Flat reference's total for the same combination."""
    if profile.combination_id != flat_profile.combination_id:
        raise ParameterError(
            f"combination mismatch: {profile.combination_id!r} vs {flat_profile.combination_id!r}")
    ref = flat_profile.total
    if not ref > 0:
        raise DegenerateReferenceError(f"Flat reference for {profile.combination_id!r} has zero energy")
    return NormalizedProfile(profile.band_curves / ref, profile.sample_rate,
                             profile.combination_id, profile.labels)


def band_difference(panel: NormalizedProfile, reference: NormalizedProfile):
    """Percentage change per band and in total, ``100 * (panel / reference - 1)``.

    Bands where the reference is zero come back as NaN.
    """
    p, r = panel.tnce_bands, reference.tnce_bands
    with np.errstate(divide="ignore", invalid="ignore"):
        bands = np.where(r != 0, 100.0 * (p / np.where(r != 0, r, 1.0) - 1.0), np.nan)
    rt = reference.tnce_total
    total = 100.0 * (panel.tnce_total / rt - 1.0) if rt != 0 else float("nan")
    return bands, total


def to_db(x):
    """``10 * log10(x)``; zero maps to ``-inf``."""
    a = np.asarray(x, dtype=float)
    if np.any(a < 0) or np.any(np.isnan(a)):
        raise ParameterError("dB mapping needs non-negative input")
    with np.errstate(divide="ignore"):
        out = 10.0 * np.log10(a)
    return float(out) if out.ndim == 0 else out


def clamp_db(db, floor=DB_FLOOR, ceil=DB_CEIL):
    return np.clip(db, floor, ceil)


def percentile_mean(values, p=90.0, axis=0):
    """Mean of the upper tail at or above the ``p``-th percentile.

    For 2-D input the tail is taken independently along ``axis`` (e.g. one
    column per band).
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ParameterError("percentile_mean of empty input")
    if not 0 < p < 100:
        raise ParameterError("percentile must be in (0, 100)")
    if v.ndim == 1:
        t = np.percentile(v, p, method="linear")
        return float(v[v >= t].mean())
    v = np.moveaxis(v, axis, 0)
    t = np.percentile(v, p, axis=0, method="linear")
    mask = v >= t
    return np.sum(np.where(mask, v, 0.0), axis=0) / np.sum(mask, axis=0)


def percentile_value(values, p=90.0, axis=0):
    """The ``p``-th percentile itself, the alternative aggregate."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ParameterError("percentile_value of empty input")
    return np.percentile(v, p, axis=axis, method="linear")


def diffuseness_time(profile: EnergyProfile, fraction=0.5):
    """Per band, the earliest time (s) the curve reaches ``fraction`` of its total.

    Zero-energy bands give NaN.
    """
    curves = profile.band_curves
    totals = curves[:, -1]
    out = np.full(len(curves), np.nan)
    for k, (c, tot) in enumerate(zip(curves, totals)):
        if tot > 0:
            idx = int(np.argmax(c >= fraction * tot * (1 - 1e-12)))
            out[k] = idx / profile.sample_rate
    return out


@dataclass(frozen=True, eq=False)
class GridReport:
    """dB cells per layer (0..2) and band, arranged as in the measurement grid.

    ``layers[l]`` has shape ``(5, n, n)``; ``no_data[l]`` flags cells without a
    measurement. ``mic_cell`` is ``(layer, row, col)`` or None.
    """

    microphone_id: int | None
    layers: tuple
    no_data: tuple
    mic_cell: tuple | None
    floor: float = DB_FLOOR
    ceil: float = DB_CEIL
    labels: tuple = BAND_LABELS

    def clamped(self):
        return tuple(clamp_db(np.where(nd, np.nan, l), self.floor, self.ceil)
                     for l, nd in zip(self.layers, self.no_data))


def _tnce_of(value):
    if isinstance(value, EnergyProfile):
        return value.tnce_bands if isinstance(value, NormalizedProfile) else value.band_totals
    return np.asarray(value, dtype=float)


def grid_report(profiles: Mapping, grid, microphone_id: int | None, floor=DB_FLOOR, ceil=DB_CEIL,
                aggregate: str | None = None) -> GridReport:
    """Arrange per-combination band TNCE values onto the grid layers.

    ``profiles`` maps :class:`~echopanel.gridplan.Combination` (or ``(a, b)``
    tuples) to a :class:`NormalizedProfile` or a 5-vector of TNCE values. With
    ``aggregate="mean"`` every cell holds the mean over all pairs touching that
    point and no microphone is marked.
    """
    from .gridplan import Combination

    lookup = {Combination.of(*k): _tnce_of(v) for k, v in profiles.items()}
    if aggregate not in (None, "mean"):
        raise ParameterError(f"unknown aggregate {aggregate!r}")
    if aggregate is None and microphone_id not in range(len(grid)):
        raise ParameterError(f"unknown microphone id {microphone_id}")
    sums: dict[int, list] = {}
    if aggregate == "mean":
        for c, v in lookup.items():
            sums.setdefault(c.a, []).append(v)
            sums.setdefault(c.b, []).append(v)
    nb = len(BAND_LABELS)
    layers, no_data = [], []
    mic_cell = None
    for layer in range(3):
        n = grid.layer_size(layer)
        vals = np.full((nb, n, n), np.nan)
        nd = np.ones((n, n), dtype=bool)
        for pid in grid.layer_ids(layer):
            row, col = grid.cell(pid)
            if aggregate == "mean":
                if pid in sums:
                    vals[:, row, col] = to_db(np.mean(sums[pid], axis=0))
                    nd[row, col] = False
                continue
            if pid == microphone_id:
                mic_cell = (layer, row, col)
                continue
            v = lookup.get(Combination.of(pid, microphone_id))
            if v is not None:
                vals[:, row, col] = to_db(v)
                nd[row, col] = False
        layers.append(vals)
        no_data.append(nd)
    if aggregate is None and mic_cell is not None:
        l, r, c = mic_cell
        no_data[l][r, c] = False  # rendered as "M", not "+"
    return GridReport(microphone_id if aggregate is None else None, tuple(layers), tuple(no_data),
                      mic_cell, floor, ceil)
