import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from echopanel.errors import ParameterError
from echopanel.filterbank import (BAND_LABELS, FilterBank, apply, band_gains, build_filterbank, itersine,
                                  verify_tight_frame)
from echopanel.signals import Signal


def test_itersine_partition_of_unity():
    u = np.linspace(-0.5, 0.0, 1001)
    assert np.allclose(itersine(u) ** 2 + itersine(u + 0.5) ** 2, 1.0, atol=1e-12)
    assert itersine(0.0) == pytest.approx(1.0)
    assert itersine(0.5) == pytest.approx(0.0, abs=1e-15)
    assert itersine(0.7) == 0.0


def test_tight_frame():
    assert verify_tight_frame(build_filterbank()) <= 1e-9


def test_band_peaks_at_centres():
    g = band_gains(np.array([5000.0, 10000.0, 20000.0]))
    assert g[1, 0] == pytest.approx(1.0)
    assert g[2, 1] == pytest.approx(1.0)
    assert g[3, 2] == pytest.approx(1.0)


def test_dc_and_nyquist_bands():
    g = band_gains(np.array([0.0, 48000.0]))
    assert g[0, 0] == pytest.approx(1.0)  # DC lands in the low band
    assert g[4, 1] == pytest.approx(1.0)


def test_low_and_high_bands_disjoint():
    g = band_gains(np.linspace(0, 48000, 5001))
    assert np.all(g[0] * g[4] == 0)


def test_build_rejects_bad_args():
    with pytest.raises(ParameterError):
        build_filterbank(48000)
    with pytest.raises(ParameterError):
        build_filterbank(96000, 1000)


def test_apply_preserves_length_and_sum(rng):
    x = rng.standard_normal(384)
    bands = apply(build_filterbank(), Signal(x, 96000, "impulse_response"))
    assert bands.as_array().shape == (5, 384)
    assert np.allclose(bands.as_array().sum(axis=0), np.fft.irfft(
        np.fft.rfft(x) * band_gains(np.fft.rfftfreq(384, 1 / 96000)).sum(axis=0), 384))


def test_pure_tone_lands_in_its_band():
    t = np.arange(4096) / 96000
    fb = build_filterbank()
    for k, f in enumerate((1500.0, 5000.0, 10000.0, 20000.0, 38000.0)):
        f = round(f * 4096 / 96000) * 96000 / 4096  # on a bin, no leakage
        bands = apply(fb, Signal(np.sin(2 * np.pi * f * t), 96000, "impulse_response"))
        e = (bands.as_array() ** 2).sum(axis=1)
        assert np.argmax(e) == k


def test_sample_rate_mismatch():
    with pytest.raises(ParameterError):
        apply(build_filterbank(), Signal(np.ones(10), 192000, "impulse_response"))


def test_json_roundtrip():
    fb = build_filterbank(96000, 1024)
    back = FilterBank.from_json(fb.to_json())
    assert back.labels == BAND_LABELS
    assert np.array_equal(back.gains, fb.gains)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.integers(16, 600), elements=st.floats(-1e3, 1e3)))
def test_parseval_property(x):
    bands = apply(build_filterbank(), Signal(x, 96000, "impulse_response"))
    e_in = float(np.dot(x, x))
    e_out = float((bands.as_array() ** 2).sum())
    assert abs(e_out - e_in) <= 1e-9 * max(e_in, 1e-300) + 1e-12
