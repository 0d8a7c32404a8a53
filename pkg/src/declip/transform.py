"""STFT analysis/synthesis.

The forward transform is un-normalised; synthesis is weighted overlap-add
divided by the summed squared window, so ``istft(stft(x)) == x`` whenever the
squared window envelope is non-zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from . import autodiff as ad
from .autodiff import Tensor
from .errors import NumericalError
from .signal import Waveform, as_samples

WINDOWS = ("hann", "rect")


def make_window(kind: str, length: int) -> np.ndarray:
    if kind == "hann":
        # periodic Hann (COLA at hop = length / k, k >= 2)
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(length) / length)
    if kind == "rect":
        return np.ones(length)
    raise ValueError(f"unknown window {kind!r}; expected one of {WINDOWS}")


@dataclass(frozen=True)
class StftConfig:
    fft_size: int = 512
    win_length: int | None = None
    hop: int = 128
    window: str = "hann"
    center_pad: bool = True
    # analysis-only configs (loss resolutions) skip the COLA requirement
    require_cola: bool = True

    def __post_init__(self):
        if self.win_length is None:
            object.__setattr__(self, "win_length", self.fft_size)
        n, w, h = self.fft_size, self.win_length, self.hop
        if n < 2 or n & (n - 1):
            raise ValueError(f"fft_size must be a power of two >= 2, got {n}")
        if not 0 < w <= n:
            raise ValueError(f"win_length must be in (0, fft_size={n}], got {w}")
        if not 0 < h <= w:
            raise ValueError(f"hop must be in (0, win_length={w}], got {h}")
        make_window(self.window, 1)
        if self.require_cola and not self.is_cola():
            raise ValueError(f"{self.window} window of length {w} is not COLA at hop {h}")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def pad(self) -> int:
        return self.fft_size // 2 if self.center_pad else 0

    def window_array(self) -> np.ndarray:
        """Analysis window zero-padded (centred) to ``fft_size``."""
        w = make_window(self.window, self.win_length)
        left = (self.fft_size - self.win_length) // 2
        out = np.zeros(self.fft_size)
        out[left:left + self.win_length] = w
        return out

    def is_cola(self) -> bool:
        if self.win_length % self.hop:
            return False
        w = make_window(self.window, self.win_length)
        period = w.reshape(-1, self.hop).sum(axis=0)
        return bool(np.ptp(period) <= 1e-10 * max(period.max(), 1.0))

    def n_frames(self, n_samples: int) -> int:
        if self.center_pad:
            return n_samples // self.hop + 1
        if n_samples < self.fft_size:
            raise ValueError(f"signal of {n_samples} samples shorter than fft_size {self.fft_size}")
        return (n_samples - self.fft_size) // self.hop + 1


@dataclass(frozen=True)
class ComplexSpectrogram:
    """Real tensor of shape ``(2, F, T)``: channel 0 real part, channel 1 imaginary part."""

    data: np.ndarray
    config: StftConfig

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim != 3 or d.shape[0] != 2 or d.shape[1] != self.config.n_bins:
            raise ValueError(f"spectrogram must be (2, {self.config.n_bins}, T), got {d.shape}")
        if not np.all(np.isfinite(d)):
            raise ValueError("spectrogram contains NaN or Inf")
        object.__setattr__(self, "data", d)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def complex(self) -> np.ndarray:
        return self.data[0] + 1j * self.data[1]

    @property
    def magnitude(self) -> np.ndarray:
        return np.hypot(self.data[0], self.data[1])


def reflect_indices(n: int, pad: int) -> np.ndarray:
    return np.pad(np.arange(n), pad, mode="reflect")


def stft_array(x: np.ndarray, cfg: StftConfig) -> np.ndarray:
    """``(..., N)`` -> ``(..., 2, F, T)`` real array."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    if n < 1:
        raise ValueError("cannot transform an empty signal")
    if cfg.center_pad:
        x = x[..., reflect_indices(n, cfg.pad)]
    frames = _kernels.frame_signal(x, cfg.fft_size, cfg.hop) * cfg.window_array()
    spec = np.fft.rfft(frames, cfg.fft_size, axis=-1)        # (..., T, F)
    out = np.stack([spec.real, spec.imag], axis=-3)           # (..., 2, T, F)
    return np.swapaxes(out, -1, -2).copy()


def _synthesis_envelope(cfg: StftConfig, n_frames: int, length: int) -> np.ndarray:
    w2 = cfg.window_array() ** 2
    return _kernels.overlap_add(np.broadcast_to(w2, (n_frames, cfg.fft_size)), cfg.hop, length)


def istft_array(spec: np.ndarray, cfg: StftConfig, out_len: int) -> np.ndarray:
    """``(..., 2, F, T)`` -> ``(..., out_len)``."""
    spec = np.asarray(spec, dtype=np.float64)
    if spec.shape[-3] != 2 or spec.shape[-2] != cfg.n_bins:
        raise ValueError(f"expected (..., 2, {cfg.n_bins}, T) spectrogram, got {spec.shape}")
    n_frames = spec.shape[-1]
    total = cfg.pad + out_len + cfg.pad
    if n_frames != cfg.n_frames(out_len):
        raise ValueError(f"{n_frames} frames inconsistent with out_len={out_len} (expected {cfg.n_frames(out_len)})")
    c = np.swapaxes(spec[..., 0, :, :] + 1j * spec[..., 1, :, :], -1, -2)
    frames = np.fft.irfft(c, cfg.fft_size, axis=-1) * cfg.window_array()
    sig = _kernels.overlap_add(frames, cfg.hop, total)
    env = _synthesis_envelope(cfg, n_frames, total)
    region = slice(cfg.pad, cfg.pad + out_len)
    if np.any(env[region] < 1e-11):
        raise NumericalError("window/hop combination leaves zero synthesis normalisation")
    return sig[..., region] / env[region]


def stft(x, cfg: StftConfig) -> ComplexSpectrogram:
    return ComplexSpectrogram(stft_array(as_samples(x), cfg), cfg)


def istft(spec: ComplexSpectrogram, out_len: int, sample_rate: int = 16000) -> Waveform:
    return Waveform(istft_array(spec.data, spec.config, out_len), sample_rate)


# ---- differentiable versions on batched Tensors ------------------------------

def stft_tensor(x: Tensor, cfg: StftConfig) -> tuple[Tensor, Tensor]:
    """``(B, N)`` -> (real, imag), each ``(B, T, F)``."""
    if cfg.center_pad:
        x = pad_reflect(x, cfg.pad)
    frames = ad.frame(x, cfg.fft_size, cfg.hop)
    win = ad.expand(Tensor(cfg.window_array()), frames.shape)
    return ad.rfft(ad.mul(frames, win), cfg.fft_size)


def pad_reflect(x: Tensor, pad: int) -> Tensor:
    if pad < x.shape[-1]:
        return ad.pad_reflect(x, pad)
    idx = reflect_indices(x.shape[-1], pad)
    return _gather_last(x, idx)


def _gather_last(x: Tensor, idx: np.ndarray) -> Tensor:
    from .autodiff.tensor import make_result

    n = x.shape[-1]

    def back(g):
        flat = g.reshape(-1, g.shape[-1])
        gx = np.zeros((flat.shape[0], n))
        for row in range(flat.shape[0]):
            gx[row] = np.bincount(idx, weights=flat[row], minlength=n)
        return (gx.reshape(x.shape),)

    return make_result(x.data[..., idx], (x,), back, "gather")


def istft_tensor(spec: Tensor, cfg: StftConfig, out_len: int) -> Tensor:
    """``(B, 2, F, T)`` -> ``(B, out_len)``."""
    b, two, f, t = spec.shape
    if two != 2 or f != cfg.n_bins or t != cfg.n_frames(out_len):
        raise ValueError(f"istft: spectrogram {spec.shape} inconsistent with config/out_len={out_len}")
    ri = ad.transpose(spec, (1, 0, 3, 2))                    # (2, B, T, F)
    frames = ad.irfft(ri[0], ri[1], cfg.fft_size)             # (B, T, fft)
    frames = ad.mul(frames, ad.expand(Tensor(cfg.window_array()), frames.shape))
    total = cfg.pad + out_len + cfg.pad
    sig = ad.overlap_add(frames, cfg.hop, total)
    env = _synthesis_envelope(cfg, t, total)[cfg.pad:cfg.pad + out_len]
    if np.any(env < 1e-11):
        raise NumericalError("window/hop combination leaves zero synthesis normalisation")
    sig = sig[:, cfg.pad:cfg.pad + out_len]
    return ad.mul(sig, ad.expand(Tensor(1.0 / env), sig.shape))
