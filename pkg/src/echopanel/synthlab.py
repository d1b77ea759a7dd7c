"""Analytic image-source measurements used as ground truth for the pipeline.

Amplitudes follow spherical spreading in 1/mm: the direct path contributes
``1/d1`` and the specular reflection ``R/d2`` with ``d2`` the source to
mirrored-receiver distance. Source and receiver are omnidirectional; there is
no edge diffraction and no air absorption.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np
from scipy import fft as sfft

from .errors import ParameterError
from .signals import Environment, Signal
from .sigproc import speed_of_sound

FRACTIONAL_TAPS = 64
FRACTIONAL_BETA = 8.6
DEFAULT_IR_LEN = 2048


@dataclass(frozen=True)
class ScenePanel:
    model: str = "flat"
    reflection: float = 1.0
    offset: Callable | None = None  # z offset (mm) of the surface as f(x, y)

    def __post_init__(self):
        if self.model not in ("flat", "absorber", "displaced_flat"):
            raise ParameterError(f"unknown panel model {self.model!r}")
        if not 0 <= self.reflection <= 1:
            raise ParameterError("reflection coefficient must be in [0, 1]")
        if self.model == "absorber" and self.reflection != 0:
            object.__setattr__(self, "reflection", 0.0)
        if self.model == "displaced_flat" and self.offset is None:
            raise ParameterError("displaced_flat needs an offset map")

    @classmethod
    def flat(cls, reflection=1.0):
        return cls("flat", reflection)

    @classmethod
    def absorber(cls):
        return cls("absorber", 0.0)

    @classmethod
    def displaced_flat(cls, offset, reflection=1.0):
        return cls("displaced_flat", reflection, offset)


def fractional_impulse(n: int, position: float, amplitude=1.0, taps=FRACTIONAL_TAPS,
                       beta=FRACTIONAL_BETA, out=None) -> np.ndarray:
    """Kaiser-windowed sinc of ``taps`` samples centred on a fractional index."""
    out = np.zeros(n) if out is None else out
    k0 = int(np.floor(position)) - taps // 2 + 1
    k = np.arange(k0, k0 + taps)
    t = k - position
    w = np.i0(beta * np.sqrt(np.clip(1 - (2 * t / taps) ** 2, 0, None))) / np.i0(beta)
    sel = (k >= 0) & (k < n)
    out[k[sel]] += amplitude * (np.sinc(t) * w)[sel]
    return out


def reflection_geometry(source, receiver, panel: ScenePanel):
    """Path length (mm) and amplitude (1/mm) of the specular reflection."""
    S = np.asarray(source, dtype=float)
    R = np.asarray(receiver, dtype=float)
    Rm = R * np.array([1.0, 1.0, -1.0])
    if panel.model != "displaced_flat":
        d2 = float(np.linalg.norm(S - Rm))
        return d2, panel.reflection / d2
    # specular point on z=0, then reflect off the locally displaced plane
    t = S[2] / (S[2] + R[2])
    px, py = S[0] + t * (R[0] - S[0]), S[1] + t * (R[1] - S[1])
    off = panel.offset
    dz = float(off(px, py))
    h = 1.0
    curv = 0.5 * ((off(px + h, py) - 2 * dz + off(px - h, py))
                  + (off(px, py + h) - 2 * dz + off(px, py - h))) / h**2
    Rd = np.array([R[0], R[1], 2 * dz - R[2]])
    d2 = float(np.linalg.norm(S - Rd))
    P = np.array([px, py, dz])
    l1 = float(np.linalg.norm(S - P))
    l2 = float(np.linalg.norm(R - P))
    cos_t = max((S[2] - dz) / l1, 1e-6)
    # reflected wavefront radii for a mirror of mean curvature ``curv`` (>0 concave)
    inv_a = 1 / l1 - 2 * curv / cos_t
    inv_b = 1 / l1 - 2 * curv * cos_t
    ra, rb = 1 / inv_a if inv_a else np.inf, 1 / inv_b if inv_b else np.inf
    spread = np.sqrt(np.abs(ra * rb / ((ra + l2) * (rb + l2)))) if np.isfinite(ra * rb) else 1.0
    return d2, panel.reflection * spread / l1


def simulate_ir(source, receiver, panel: ScenePanel, sample_rate=96000, temperature_c=20.0,
                length=DEFAULT_IR_LEN) -> Signal:
    """Direct plus specular impulse response at fractional delays."""
    S = np.asarray(source, dtype=float)
    R = np.asarray(receiver, dtype=float)
    if S[2] <= 0 or R[2] <= 0:
        raise ParameterError("source and receiver must lie above the plane")
    d1 = float(np.linalg.norm(S - R))
    if d1 == 0:
        raise ParameterError("source and receiver coincide")
    c_mm = speed_of_sound(temperature_c) * 1000.0
    h = fractional_impulse(length, d1 / c_mm * sample_rate, 1.0 / d1)
    d2, amp = reflection_geometry(S, R, panel)
    if amp != 0:
        fractional_impulse(length, d2 / c_mm * sample_rate, amp, out=h)
    meta = {"direct_mm": d1, "reflected_mm": d2, "reflected_amplitude": amp}
    return Signal(h, sample_rate, "impulse_response", meta)


class Recorder:
    """Convolves impulse responses with one sweep, caching its spectrum."""

    def __init__(self, sweep: Signal, ir_len=DEFAULT_IR_LEN):
        self.sweep = sweep
        self.ir_len = ir_len
        self.length = len(sweep) + ir_len - 1
        self.nfft = sfft.next_fast_len(self.length, real=True)
        self._S = sfft.rfft(np.asarray(sweep.samples, dtype=np.float64), self.nfft)

    def __call__(self, ir: Signal) -> Signal:
        if ir.sample_rate != self.sweep.sample_rate:
            raise ParameterError("impulse response and sweep sample rates differ")
        if len(ir) > self.ir_len:
            raise ParameterError("impulse response longer than the recorder was set up for")
        y = sfft.irfft(sfft.rfft(ir.samples, self.nfft) * self._S, self.nfft)[: self.length]
        return Signal(y, ir.sample_rate, "recording", dict(ir.meta))


def simulate_recording(source, receiver, panel: ScenePanel, sweep: Signal, temperature_c=20.0,
                       ir_len=DEFAULT_IR_LEN, recorder: Recorder | None = None) -> Signal:
    rec = recorder or Recorder(sweep, ir_len)
    return rec(simulate_ir(source, receiver, panel, sweep.sample_rate, temperature_c, rec.ir_len))


@dataclass(frozen=True)
class SynthMeasurement:
    combination: object
    recording: Signal
    foam_recording: Signal
    environment: Environment


def synth_panel_dataset(grid, combinations, panel: ScenePanel, env: Environment | None, sweep: Signal,
                        ir_len=DEFAULT_IR_LEN) -> Iterator[SynthMeasurement]:
    """One recording plus matching absorber recording per combination, lazily.

    The first point of each pair acts as the speaker.
    """
    env = env or Environment()
    rec = Recorder(sweep, ir_len)
    foam = ScenePanel.absorber()
    for comb in combinations:
        s, r = grid.points[comb.a], grid.points[comb.b]
        meta = {"combination_id": comb.key}
        x = simulate_recording(s, r, panel, sweep, env.temperature_c, recorder=rec)
        f = simulate_recording(s, r, foam, sweep, env.temperature_c, recorder=rec)
        yield SynthMeasurement(comb, x.with_samples(x.samples, **meta), f.with_samples(f.samples, **meta), env)
