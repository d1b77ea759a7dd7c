import json

import numpy as np
import pytest

from echopanel.errors import FormatError, ParameterError
from echopanel.signals import (Environment, Signal, read_f32, read_signal, sidecar_path, write_f32,
                               write_signal)


def test_signal_validation():
    with pytest.raises(ParameterError):
        Signal(np.array([1.0, np.nan]))
    with pytest.raises(ParameterError):
        Signal(np.ones(3), kind="nope")
    with pytest.raises(ParameterError):
        Signal(np.ones(3), sample_rate=0)
    s = Signal(np.ones(3))
    with pytest.raises(ValueError):
        s.samples[0] = 2


def test_environment_roundtrip():
    e = Environment(23.5, 40.0, 1010.0, 35.0)
    assert Environment.from_dict(e.to_dict()) == e
    with pytest.raises(ParameterError):
        Environment(temperature_c=-300)


def test_f32_roundtrip_bitwise(tmp_path, rng):
    s = Signal(rng.standard_normal(100).astype(np.float32), 96000, "recording",
               {"panel_id": "0001_0", "combination_id": "00_01"})
    p = write_f32(tmp_path / "a.f32", s)
    assert read_f32(p) == s
    side = json.loads(sidecar_path(p).read_text())
    assert side["length"] == 100 and side["sample_rate"] == 96000
    assert p.read_bytes() == s.samples.astype("<f4").tobytes()


def test_f32_errors(tmp_path):
    s = Signal(np.ones(10, dtype=np.float32))
    p = write_f32(tmp_path / "a.f32", s)
    sidecar_path(p).write_text("{not json")
    with pytest.raises(FormatError):
        read_f32(p)
    sidecar_path(p).unlink()
    with pytest.raises(FormatError):
        read_f32(p)
    write_f32(p, s)
    p.write_bytes(b"\0" * 12)
    with pytest.raises(FormatError):
        read_f32(p)


def test_wav_roundtrip(tmp_path, rng):
    s = Signal(rng.uniform(-1, 1, 50).astype(np.float32), 96000, "recording")
    write_signal(tmp_path / "x.wav", s)
    back = read_signal(tmp_path / "x.wav")
    assert back.sample_rate == 96000
    assert np.array_equal(back.samples, s.samples)
