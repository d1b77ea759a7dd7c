"""Five-band warped itersine filterbank forming a tight frame.

Three bandpass windows sit one octave apart (5, 10, 20 kHz) in log-frequency,
each spanning two octaves between its zeros. The low and high bands are the
pointwise complement ``sqrt(1 - sum(bandpass**2))`` below and above 10 kHz,
so the squared gains sum to one at every frequency.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import fft as sfft

from .errors import ParameterError
from .signals import Signal

BAND_LABELS = (2500, 5000, 10000, 20000, 40000)
BANDPASS_CENTERS = (5000.0, 10000.0, 20000.0)
RESIDUAL_SPLIT = 10000.0
MIN_SAMPLE_RATE = 88200.0


def itersine(u):
    """Mother window ``sin(pi/2 * cos(pi*u)**2)`` supported on [-1/2, 1/2]."""
    u = np.asarray(u, dtype=float)
    out = np.sin(0.5 * np.pi * np.cos(np.pi * u) ** 2)
    return np.where(np.abs(u) <= 0.5, out, 0.0)


def band_gains(freqs, centers=BANDPASS_CENTERS, split=RESIDUAL_SPLIT):
    """Gains of all five bands at ``freqs`` (Hz), shape ``(5, len(freqs))``."""
    f = np.abs(np.asarray(freqs, dtype=float))
    logf = np.log2(np.where(f > 0, f, 1.0))
    bp = []
    for fc in centers:
        # one octave of translation is half the window support
        u = (logf - np.log2(fc)) / 2.0
        bp.append(np.where(f > 0, itersine(u), 0.0))
    bp = np.array(bp)
    resid = np.sqrt(np.maximum(0.0, 1.0 - np.sum(bp**2, axis=0)))
    low = np.where(f < split, resid, 0.0)
    high = np.where(f >= split, resid, 0.0)
    return np.vstack([low, bp, high])


@lru_cache(maxsize=32)
def _grid_gains(sample_rate: float, n: int) -> np.ndarray:
    g = band_gains(sfft.rfftfreq(n, 1.0 / sample_rate))
    g.setflags(write=False)
    return g


@dataclass(frozen=True, eq=False)
class FilterBank:
    sample_rate: float
    analysis_len: int
    gains: np.ndarray  # (5, analysis_len // 2 + 1) on the rfft grid
    labels: tuple = field(default=BAND_LABELS)

    @property
    def freqs(self) -> np.ndarray:
        return sfft.rfftfreq(self.analysis_len, 1.0 / self.sample_rate)

    def gains_at(self, n: int) -> np.ndarray:
        """Gains evaluated on the rfft grid of an ``n``-point transform."""
        if n == self.analysis_len:
            return self.gains
        return _grid_gains(float(self.sample_rate), int(n))

    def to_json(self) -> str:
        return json.dumps({
            "sample_rate": self.sample_rate,
            "analysis_len": self.analysis_len,
            "bands": [{"label": lab, "gains": g.tolist()} for lab, g in zip(self.labels, self.gains)],
        })

    @classmethod
    def from_json(cls, text: str) -> "FilterBank":
        d = json.loads(text)
        gains = np.array([b["gains"] for b in d["bands"]], dtype=float)
        return cls(d["sample_rate"], d["analysis_len"], gains, tuple(b["label"] for b in d["bands"]))


def build_filterbank(sample_rate=96000, analysis_len=65536) -> FilterBank:
    if sample_rate < MIN_SAMPLE_RATE:
        raise ParameterError(f"sample rate {sample_rate} leaves no room for the 40 kHz band")
    if analysis_len < 512 or analysis_len & (analysis_len - 1):
        raise ParameterError("analysis_len must be a power of two >= 512")
    return FilterBank(sample_rate, analysis_len, _grid_gains(float(sample_rate), int(analysis_len)))


def verify_tight_frame(fb: FilterBank) -> float:
    """Largest deviation of the summed squared gains from one."""
    return float(np.max(np.abs(np.sum(np.asarray(fb.gains) ** 2, axis=0) - 1.0)))


@dataclass(frozen=True)
class BandSignals:
    bands: tuple  # of Signal, ordered as labels
    labels: tuple = BAND_LABELS

    def __len__(self):
        return len(self.bands)

    def __getitem__(self, i) -> Signal:
        return self.bands[i]

    @property
    def sample_rate(self):
        return self.bands[0].sample_rate

    def as_array(self) -> np.ndarray:
        return np.vstack([b.samples for b in self.bands])


def apply(fb: FilterBank, ir: Signal) -> BandSignals:
    """Zero-phase band split of ``ir``.

    Filtering is circular on the input's own length, which keeps the output
    length equal to the input and makes band energies sum to the input energy
    exactly (up to rounding).
    """
    if ir.sample_rate != fb.sample_rate:
        raise ParameterError("filterbank and signal sample rates differ")
    x = np.asarray(ir.samples, dtype=np.float64)
    n = len(x)
    X = sfft.rfft(x)
    Y = fb.gains_at(n) * X[None, :]
    y = sfft.irfft(Y, n, axis=1)
    bands = tuple(ir.with_samples(y[k], band=int(lab)) for k, lab in enumerate(fb.labels))
    return BandSignals(bands, tuple(fb.labels))
