"""Raw IQ recordings: interleaved little-endian float32 (I, Q) plus a sidecar.

The sidecar is UTF-8 ``key=value`` lines with keys ``sample_rate_hz``,
``center_freq_hz``, ``num_samples`` and optionally ``seed``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_DTYPE = np.dtype("<f4")
_SAMPLE_BYTES = 2 * _DTYPE.itemsize


class IqFormatError(ValueError):
    pass


class EmptyRecordingError(IqFormatError):
    pass


class TruncatedSampleError(IqFormatError):
    pass


class MetadataError(IqFormatError):
    pass


class NonFiniteSampleError(IqFormatError):
    pass


@dataclass
class IqRecording:
    samples: np.ndarray
    sample_rate_hz: float
    center_freq_hz: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise EmptyRecordingError("recording must hold at least one sample")
        if not np.all(np.isfinite(self.samples)):
            raise NonFiniteSampleError("recording contains non-finite samples")
        if not (math.isfinite(self.sample_rate_hz) and self.sample_rate_hz > 0):
            raise MetadataError("sample_rate_hz must be positive")
        if not (math.isfinite(self.center_freq_hz) and self.center_freq_hz >= 0):
            raise MetadataError("center_freq_hz must be nonnegative")


def save_iq(rec: IqRecording, path, metadata_path) -> None:
    inter = np.empty(2 * rec.samples.size, dtype=_DTYPE)
    c = rec.samples.astype(np.complex64)
    inter[0::2] = c.real
    inter[1::2] = c.imag
    Path(path).write_bytes(inter.tobytes())
    lines = [
        f"sample_rate_hz={rec.sample_rate_hz!r}",
        f"center_freq_hz={rec.center_freq_hz!r}",
        f"num_samples={rec.samples.size}",
    ]
    if rec.seed is not None:
        lines.append(f"seed={int(rec.seed)}")
    Path(metadata_path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_metadata(metadata_path) -> dict:
    try:
        text = Path(metadata_path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise MetadataError(f"cannot read metadata {metadata_path}: {exc}") from exc
    meta = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise MetadataError(f"{metadata_path}:{lineno}: expected key=value")
        meta[key.strip()] = value.strip()
    try:
        out = {
            "sample_rate_hz": float(meta["sample_rate_hz"]),
            "center_freq_hz": float(meta["center_freq_hz"]),
            "num_samples": int(meta["num_samples"]),
            "seed": int(meta["seed"]) if "seed" in meta else None,
        }
    except KeyError as exc:
        raise MetadataError(f"{metadata_path}: missing key {exc.args[0]}") from exc
    except ValueError as exc:
        raise MetadataError(f"{metadata_path}: {exc}") from exc
    return out


def load_iq(path, metadata_path) -> IqRecording:
    raw = Path(path).read_bytes()
    if not raw:
        raise EmptyRecordingError(f"{path}: empty recording")
    if len(raw) % _SAMPLE_BYTES:
        raise TruncatedSampleError(
            f"{path}: truncated sample ({len(raw)} bytes is not a multiple of {_SAMPLE_BYTES})"
        )
    meta = _read_metadata(metadata_path)
    inter = np.frombuffer(raw, dtype=_DTYPE)
    samples = np.empty(inter.size // 2, dtype=np.complex64)
    samples.real = inter[0::2]
    samples.imag = inter[1::2]
    if samples.size != meta["num_samples"]:
        raise MetadataError(
            f"{metadata_path}: num_samples={meta['num_samples']} but file holds {samples.size}"
        )
    if not np.all(np.isfinite(samples)):
        raise NonFiniteSampleError(f"{path}: non-finite sample values")
    return IqRecording(samples, meta["sample_rate_hz"], meta["center_freq_hz"], meta["seed"])
