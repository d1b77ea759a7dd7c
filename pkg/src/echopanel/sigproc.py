"""Sweep synthesis and impulse-response post-processing.

The processing chain is deconvolution, temperature correction, direct-sound
removal and cropping, applied in that order by :func:`process_pipeline`.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import fft as sfft

from . import kernels
from .errors import ParameterError
from .signals import Environment, Signal

C0 = 331.45  # m/s in dry air at 0 degC
REFERENCE_TEMPERATURE = 20.0
CROP_WINDOW = 0.004

DECONV_EPS = 1e-4
DECONV_BAND = (1800.0, 41000.0)
DECONV_TRANSITION = 200.0

RESAMPLE_MAX_DENOMINATOR = 1000
RESAMPLE_HALF_TAPS = 32
RESAMPLE_BETA = 8.6


def generate_sweep(f0=2000.0, f1=40000.0, duration=1.0, sample_rate=96000, fade=0.01) -> Signal:
    """Linear sine sweep from ``f0`` to ``f1`` Hz with raised-cosine edges.

    ``fade`` is the fraction of the total length faded at each end.
    """
    if not (0 < f0 < f1 <= sample_rate / 2):
        raise ParameterError(f"need 0 < f0 < f1 <= fs/2, got f0={f0}, f1={f1}, fs={sample_rate}")
    if not duration > 0:
        raise ParameterError("duration must be positive")
    if not 0 <= fade < 0.5:
        raise ParameterError("fade fraction must be in [0, 0.5)")
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    phase = 2 * np.pi * (f0 * t + 0.5 * (f1 - f0) / duration * t**2)
    x = np.sin(phase)
    nf = int(round(fade * n))
    if nf > 0:
        ramp = 0.5 - 0.5 * np.cos(np.pi * (np.arange(nf) + 0.5) / nf)
        x[:nf] *= ramp
        x[n - nf:] *= ramp[::-1]
    meta = {"f0": f0, "f1": f1, "duration": duration, "fade": fade}
    return Signal(x, sample_rate, "sweep", meta)


def sweep_frequency(t, f0, f1, duration):
    """Instantaneous frequency of :func:`generate_sweep` at time ``t`` (s)."""
    return f0 + (f1 - f0) * np.asarray(t) / duration


def delay(signal: Signal, n: int) -> Signal:
    """Prepend ``n`` zeros."""
    if n < 0:
        raise ParameterError("delay must be non-negative")
    return signal.with_samples(np.concatenate([np.zeros(n), signal.samples]))


def band_mask(freqs, band=DECONV_BAND, transition=DECONV_TRANSITION):
    """Unit gain on ``band`` with raised-cosine skirts of width ``transition`` outside it."""
    freqs = np.asarray(freqs, dtype=float)
    lo, hi = band
    m = np.zeros_like(freqs)
    m[(freqs >= lo) & (freqs <= hi)] = 1.0
    if transition > 0:
        rise = (freqs > lo - transition) & (freqs < lo)
        m[rise] = 0.5 - 0.5 * np.cos(np.pi * (freqs[rise] - (lo - transition)) / transition)
        fall = (freqs > hi) & (freqs < hi + transition)
        m[fall] = 0.5 + 0.5 * np.cos(np.pi * (freqs[fall] - hi) / transition)
    return m


@dataclass(frozen=True)
class Deconvolver:
    """Regularised inverse of one sweep at a fixed FFT length.

    Reusing one instance across many recordings of the same sweep avoids
    recomputing the sweep spectrum.
    """

    sample_rate: float
    nfft: int
    inverse: np.ndarray

    @classmethod
    def for_sweep(cls, sweep: Signal, nfft: int, eps=DECONV_EPS, band=DECONV_BAND,
                  transition=DECONV_TRANSITION) -> "Deconvolver":
        S = sfft.rfft(np.asarray(sweep.samples, dtype=np.float64), nfft)
        mag = np.abs(S)
        floor = eps * mag.max()
        phase = np.where(mag > 0, S / np.where(mag > 0, mag, 1.0), 1.0)
        denom = np.where(mag < floor, floor * phase, S)
        freqs = sfft.rfftfreq(nfft, 1.0 / sweep.sample_rate)
        inv = band_mask(freqs, band, transition) / denom
        inv.setflags(write=False)
        return cls(sweep.sample_rate, nfft, inv)

    def __call__(self, recording: Signal) -> Signal:
        if recording.sample_rate != self.sample_rate:
            raise ParameterError("recording and sweep sample rates differ")
        if len(recording) > self.nfft:
            raise ParameterError("recording longer than the deconvolution length")
        X = sfft.rfft(np.asarray(recording.samples, dtype=np.float64), self.nfft)
        h = sfft.irfft(X * self.inverse, self.nfft)
        return recording.with_samples(h, kind="impulse_response")


def deconvolution_length(recording_len: int, sweep_len: int) -> int:
    return sfft.next_fast_len(max(recording_len, sweep_len), real=True)


def deconvolve(recording: Signal, sweep: Signal, eps=DECONV_EPS, band=DECONV_BAND,
               transition=DECONV_TRANSITION) -> Signal:
    """Spectral division ``IFFT(FFT(recording) / FFT(sweep))``.

    The division is floored at ``eps`` times the peak sweep magnitude (phase
    kept) and the result is restricted to ``band`` with raised-cosine skirts.
    """
    if recording.sample_rate != sweep.sample_rate:
        raise ParameterError("recording and sweep sample rates differ")
    if len(recording) < len(sweep):
        raise ParameterError("recording shorter than sweep")
    n = deconvolution_length(len(recording), len(sweep))
    return Deconvolver.for_sweep(sweep, n, eps, band, transition)(recording)


def band_limit(signal: Signal, band=DECONV_BAND, transition=DECONV_TRANSITION, nfft=None) -> Signal:
    """Apply the deconvolution band mask to ``signal`` (circularly, at ``nfft``)."""
    n = nfft or len(signal)
    X = sfft.rfft(np.asarray(signal.samples, dtype=np.float64), n)
    X *= band_mask(sfft.rfftfreq(n, 1.0 / signal.sample_rate), band, transition)
    return signal.with_samples(sfft.irfft(X, n))


def speed_of_sound(temperature_c, c0=C0):
    """Speed of sound in m/s: ``c0 * sqrt(1 + T / 273.15)``."""
    t = np.asarray(temperature_c, dtype=float)
    if np.any(t <= -273.15):
        raise ParameterError("temperature must exceed -273.15 degC")
    c = c0 * np.sqrt(1.0 + t / 273.15)
    return float(c) if c.ndim == 0 else c


def resampling_ratio(temperature_c, reference_c=REFERENCE_TEMPERATURE, c0=C0,
                     max_denominator=RESAMPLE_MAX_DENOMINATOR) -> Fraction:
    """Best rational approximation of ``c(T) / c(reference)``.

    A sample at index ``n`` moves to ``n * ratio``: an IR recorded in warm
    air (sound arrives early) is stretched back onto the reference time axis.
    """
    r = speed_of_sound(temperature_c, c0) / speed_of_sound(reference_c, c0)
    return Fraction(r).limit_denominator(max_denominator)


@lru_cache(maxsize=64)
def resampling_filter(up: int, down: int, half_taps=RESAMPLE_HALF_TAPS, beta=RESAMPLE_BETA):
    """Kaiser-windowed sinc prototype, ``2 * half_taps`` taps per polyphase branch."""
    center = half_taps * up
    j = np.arange(2 * center + 1) - center
    fc = 1.0 / max(up, down)
    h = up * fc * np.sinc(fc * j) * np.kaiser(len(j), beta)
    h.setflags(write=False)
    return h


def resample_rational(x, up: int, down: int, n_out=None, half_taps=RESAMPLE_HALF_TAPS,
                      beta=RESAMPLE_BETA):
    """Polyphase resampling of ``x`` by ``up/down``; output index = input index * up / down."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if n_out is None:
        n_out = -(-len(x) * up // down)
    h = resampling_filter(up, down, half_taps, beta)
    return kernels.polyphase_resample(x, h, up, down, half_taps * up, n_out)


def temperature_correct(ir: Signal, temperature_c: float, reference_c=REFERENCE_TEMPERATURE,
                        c0=C0, n_out=None) -> Signal:
    """Resample ``ir`` at ``fs * c(T) / c(reference)`` to undo the temperature drift.

    The sample rate field is left unchanged. ``T == reference`` returns the
    input samples untouched.
    """
    if ir.kind != "impulse_response":
        raise ParameterError("temperature correction applies to impulse responses")
    ratio = resampling_ratio(temperature_c, reference_c, c0)
    if ratio == 1:
        return ir
    y = resample_rational(ir.samples, ratio.numerator, ratio.denominator, n_out)
    return ir.with_samples(y)


def remove_direct(ir: Signal, foam_ir: Signal) -> Signal:
    """Subtract the absorber-panel response over the overlapping length.

    Samples beyond the shorter input are copied from the longer one.
    """
    if ir.sample_rate != foam_ir.sample_rate:
        raise ParameterError("impulse responses have different sample rates")
    a = np.asarray(ir.samples, dtype=np.float64)
    f = np.asarray(foam_ir.samples, dtype=np.float64)
    n = min(len(a), len(f))
    out = (a if len(a) >= len(f) else f).copy()
    out[:n] = a[:n] - f[:n]
    return ir.with_samples(out, kind="impulse_response")


def crop(ir: Signal, window_s=CROP_WINDOW) -> Signal:
    """Keep the first ``window_s`` seconds from t=0, zero-padding short inputs."""
    if not window_s > 0:
        raise ParameterError("crop window must be positive")
    n = int(round(window_s * ir.sample_rate))
    x = np.asarray(ir.samples)
    if len(x) >= n:
        return ir.with_samples(x[:n].copy())
    return ir.with_samples(np.concatenate([x, np.zeros(n - len(x), dtype=x.dtype)]))


def process_pipeline(recording: Signal, sweep: Signal, foam_recording: Signal,
                     env: Environment | None = None, window_s=CROP_WINDOW,
                     reference_c=REFERENCE_TEMPERATURE, deconvolver: Deconvolver | None = None,
                     foam_ir: Signal | None = None, foam_env: Environment | None = None) -> Signal:
    """Recording to cropped reflection-only impulse response.

    ``foam_recording`` passes through deconvolution and temperature correction
    before it is subtracted. ``foam_ir`` may carry that already-corrected
    response to skip recomputing it across panels.
    """
    env = env or Environment()
    if not (recording.sample_rate == sweep.sample_rate == foam_recording.sample_rate):
        raise ParameterError("inconsistent sample rates")
    if deconvolver is None:
        n = deconvolution_length(max(len(recording), len(foam_recording)), len(sweep))
        deconvolver = Deconvolver.for_sweep(sweep, n)
    n_crop = int(round(window_s * recording.sample_rate))
    ratio = resampling_ratio(env.temperature_c, reference_c)
    # the polyphase kernel only looks RESAMPLE_HALF_TAPS input samples ahead,
    # so trimming here leaves the cropped output unchanged
    n_keep = -(-n_crop * ratio.denominator // ratio.numerator) + RESAMPLE_HALF_TAPS + 2

    def corrected(rec, e):
        h = deconvolver(rec)
        h = h.with_samples(h.samples[:n_keep])
        return temperature_correct(h, e.temperature_c, reference_c, n_out=n_crop)

    ir = corrected(recording, env)
    if foam_ir is None:
        foam_ir = corrected(foam_recording, foam_env or env)
    out = crop(remove_direct(ir, foam_ir), window_s)
    return out.with_samples(out.samples, environment=env.to_dict())
