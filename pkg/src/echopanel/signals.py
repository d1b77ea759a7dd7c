"""Signal containers and their on-disk formats (raw f32 + JSON sidecar, WAV)."""

from __future__ import annotations

import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import FormatError, ParameterError

DEFAULT_SAMPLE_RATE = 96000
KINDS = ("sweep", "recording", "impulse_response")


@dataclass(frozen=True)
class Environment:
    temperature_c: float = 20.0
    humidity_pct: float = 50.0
    pressure_hpa: float = 1013.25
    external_level_db: float | None = None

    def __post_init__(self):
        if not self.temperature_c > -273.15:
            raise ParameterError(f"temperature below absolute zero: {self.temperature_c}")

    def to_dict(self) -> dict:
        return {
            "temperature_c": self.temperature_c,
            "humidity_pct": self.humidity_pct,
            "pressure_hpa": self.pressure_hpa,
            "external_level_db": self.external_level_db,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Environment":
        return cls(
            temperature_c=float(d.get("temperature_c", 20.0)),
            humidity_pct=float(d.get("humidity_pct", 50.0)),
            pressure_hpa=float(d.get("pressure_hpa", 1013.25)),
            external_level_db=d.get("external_level_db"),
        )


@dataclass(frozen=True, eq=False)
class Signal:
    """A uniformly sampled real waveform.

    ``meta`` carries provenance (panel id, combination id, environment) and is
    written verbatim into the JSON sidecar.
    """

    samples: np.ndarray
    sample_rate: float = DEFAULT_SAMPLE_RATE
    kind: str = "recording"
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.samples)
        if x.dtype not in (np.float32, np.float64):
            x = x.astype(np.float64)
        if x.ndim != 1 or len(x) == 0:
            raise ParameterError("signal must be a non-empty 1-D array")
        if not np.all(np.isfinite(x)):
            raise ParameterError("signal contains NaN or Inf")
        if not self.sample_rate > 0:
            raise ParameterError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.kind not in KINDS:
            raise ParameterError(f"unknown signal kind {self.kind!r}")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)

    def __len__(self):
        return len(self.samples)

    def __eq__(self, other):
        if not isinstance(other, Signal):
            return NotImplemented
        return (
            self.sample_rate == other.sample_rate
            and self.kind == other.kind
            and self.meta == other.meta
            and self.samples.dtype == other.samples.dtype
            and np.array_equal(self.samples, other.samples)
        )

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    @property
    def energy(self) -> float:
        x = self.samples.astype(np.float64)
        return float(np.dot(x, x))

    def with_samples(self, samples, kind=None, **meta) -> "Signal":
        return Signal(samples, self.sample_rate, kind or self.kind, {**self.meta, **meta})


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> None:
    """Write via a temp file in the same directory, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sidecar_path(path: str | os.PathLike) -> Path:
    return Path(path).with_suffix(".json")


def write_f32(path, signal: Signal) -> Path:
    """Write little-endian float32 samples plus a ``.json`` sidecar."""
    path = Path(path)
    data = np.asarray(signal.samples, dtype="<f4").tobytes()
    side = {"sample_rate": signal.sample_rate, "kind": signal.kind, "length": len(signal)}
    side.update(signal.meta)
    atomic_write_bytes(path, data)
    atomic_write_bytes(sidecar_path(path), json.dumps(side, sort_keys=True, indent=1).encode())
    return path


def read_f32(path) -> Signal:
    path = Path(path)
    side_p = sidecar_path(path)
    try:
        side = json.loads(side_p.read_text())
    except FileNotFoundError:
        raise FormatError(f"missing sidecar {side_p}") from None
    except json.JSONDecodeError as e:
        raise FormatError(f"corrupt sidecar {side_p}: {e}") from None
    try:
        sr = float(side.pop("sample_rate"))
        kind = side.pop("kind")
        length = int(side.pop("length"))
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"sidecar {side_p} lacks field {e}") from None
    raw = path.read_bytes()
    if len(raw) != 4 * length:
        raise FormatError(f"{path}: expected {length} float32 samples, found {len(raw) / 4:g}")
    x = np.frombuffer(raw, dtype="<f4").astype(np.float32)
    if sr == int(sr):
        sr = int(sr)
    return Signal(x, sr, kind, side)


def write_wav(path, signal: Signal) -> Path:
    from scipy.io import wavfile

    if signal.sample_rate != int(signal.sample_rate):
        raise ParameterError("WAV requires an integer sample rate")
    buf = io.BytesIO()
    wavfile.write(buf, int(signal.sample_rate), np.asarray(signal.samples, dtype=np.float32))
    atomic_write_bytes(path, buf.getvalue())
    return Path(path)


def read_wav(path, kind="recording") -> Signal:
    from scipy.io import wavfile

    sr, x = wavfile.read(path)
    if x.ndim > 1:
        x = x[:, 0]
    if np.issubdtype(x.dtype, np.integer):
        x = x.astype(np.float64) / np.iinfo(x.dtype).max
    return Signal(x, sr, kind)


def read_signal(path, kind="recording") -> Signal:
    if str(path).lower().endswith(".wav"):
        return read_wav(path, kind)
    return read_f32(path)


def write_signal(path, signal: Signal) -> Path:
    if str(path).lower().endswith(".wav"):
        return write_wav(path, signal)
    return write_f32(path, signal)
