"""Mono WAV I/O and the clip-mask sidecar format."""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .signal import ClipMask

MASK_MAGIC = b"CMSK"
FORMATS = ("pcm16", "float32")


class WavError(ValueError):
    pass


def read_wav(path, expected_rate: int | None = 16000) -> tuple[np.ndarray, int]:
    """Return float64 samples in [-1, 1] and the sample rate."""
    try:
        rate, data = wavfile.read(str(path))
    except (OSError, ValueError) as exc:
        raise WavError(f"cannot read WAV {path}: {exc}") from exc
    if data.ndim != 1:
        raise WavError(f"{path}: expected mono audio, got {data.shape[1]} channels")
    if expected_rate is not None and rate != expected_rate:
        raise WavError(f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz")
    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        x = data.astype(np.float64) / 2**31
    elif data.dtype == np.uint8:
        x = (data.astype(np.float64) - 128.0) / 128.0
    elif np.issubdtype(data.dtype, np.floating):
        x = data.astype(np.float64)
    else:
        raise WavError(f"{path}: unsupported sample type {data.dtype}")
    if x.size == 0:
        raise WavError(f"{path}: no samples")
    if not np.all(np.isfinite(x)):
        raise WavError(f"{path}: contains NaN or Inf")
    return x, int(rate)


def write_wav(path, samples, sample_rate: int = 16000, fmt: str = "float32") -> None:
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    if fmt == "pcm16":
        data = np.round(np.clip(x, -1.0, 32767 / 32768) * 32768.0).astype(np.int16)
    elif fmt == "float32":
        data = x.astype(np.float32)
    else:
        raise ValueError(f"unknown WAV format {fmt!r}; expected one of {FORMATS}")
    wavfile.write(str(path), int(sample_rate), data)


def write_mask(path, mask: ClipMask) -> None:
    Path(path).write_bytes(MASK_MAGIC + struct.pack("<I", len(mask)) + mask.labels.tobytes())


def read_mask(path, theta: float = float("inf")) -> ClipMask:
    buf = Path(path).read_bytes()
    if len(buf) < 8 or buf[:4] != MASK_MAGIC:
        raise WavError(f"{path}: not a clip-mask file")
    (n,) = struct.unpack_from("<I", buf, 4)
    if len(buf) != 8 + n:
        raise WavError(f"{path}: header says {n} labels, file holds {len(buf) - 8}")
    labels = np.frombuffer(buf, dtype=np.uint8, offset=8)
    if labels.size and labels.max() > 2:
        raise WavError(f"{path}: label values must be 0, 1 or 2")
    return ClipMask(labels.copy(), theta)
