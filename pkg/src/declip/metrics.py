"""SDR metrics and the training objective (waveform L1 + multi-resolution STFT)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import NoClippedRegionError, NumericalError
from .signal import ClipMask, as_samples
from .transform import ComplexSpectrogram, StftConfig, stft_array, stft_tensor

MAG_FLOOR = 1e-7


def sdr(ref, est) -> float:
    """20*log10(||ref|| / ||ref - est||) in dB; +inf for a perfect estimate."""
    r, e = as_samples(ref), as_samples(est)
    if r.shape != e.shape:
        raise ValueError(f"length mismatch: reference {r.size} vs estimate {e.size}")
    num = np.linalg.norm(r)
    if num == 0.0:
        raise ValueError("SDR undefined for a silent reference")
    den = np.linalg.norm(r - e)
    if den == 0.0:
        return math.inf
    return float(20.0 * np.log10(num / den))


def sdr_c(ref, est, mask: ClipMask) -> float:
    """SDR restricted to the clipped samples of ``mask``."""
    r, e = as_samples(ref), as_samples(est)
    if len(mask) != r.size:
        raise ValueError(f"mask length {len(mask)} does not match signal length {r.size}")
    idx = mask.clipped
    if not idx.any():
        raise NoClippedRegionError("mask has no clipped samples; SDR_c is undefined")
    return sdr(r[idx], e[idx])


def _mag(spec) -> np.ndarray:
    if isinstance(spec, ComplexSpectrogram):
        return spec.magnitude
    d = np.asarray(spec, dtype=np.float64)
    return np.hypot(d[0], d[1])


def sc_loss(ref, est) -> float:
    """Spectral convergence: || |X| - |X_hat| ||_F / || |X| ||_F."""
    a, b = _mag(ref), _mag(est)
    if a.shape != b.shape:
        raise ValueError(f"spectrogram shape mismatch {a.shape} vs {b.shape}")
    den = np.linalg.norm(a)
    if den == 0.0:
        raise NumericalError("spectral convergence undefined: reference magnitude is all zero")
    return float(np.linalg.norm(a - b) / den)


def mag_loss(ref, est) -> float:
    """Mean absolute difference of natural-log magnitudes (floored at 1e-7)."""
    a, b = _mag(ref), _mag(est)
    if a.shape != b.shape:
        raise ValueError(f"spectrogram shape mismatch {a.shape} vs {b.shape}")
    la = np.log(np.maximum(a, MAG_FLOOR))
    lb = np.log(np.maximum(b, MAG_FLOOR))
    return float(np.mean(np.abs(la - lb)))


@dataclass(frozen=True)
class MrStftConfig:
    """(fft_size, hop, win_length) per resolution."""

    resolutions: tuple[tuple[int, int, int], ...] = ((512, 50, 512), (1024, 120, 1024), (2048, 240, 2048))

    def __post_init__(self):
        if not self.resolutions:
            raise ValueError("need at least one STFT resolution")
        object.__setattr__(self, "resolutions", tuple(tuple(int(v) for v in r) for r in self.resolutions))
        self.stft_configs()

    def stft_configs(self) -> list[StftConfig]:
        return [StftConfig(fft_size=n, hop=h, win_length=w, require_cola=False) for n, h, w in self.resolutions]


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 100.0
    lambda2: float = 1.0

    def __post_init__(self):
        for v in (self.lambda1, self.lambda2):
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"loss weights must be finite and non-negative, got {v}")


def total_loss(x, x_hat, w: LossWeights = LossWeights(), mr: MrStftConfig = MrStftConfig()):
    """Composite objective on plain arrays; returns ``(total, breakdown)``."""
    a, b = as_samples(x), as_samples(x_hat)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    l1 = float(np.mean(np.abs(a - b)))
    sc, mag = [], []
    for cfg in mr.stft_configs():
        sa, sb = stft_array(a, cfg), stft_array(b, cfg)
        sc.append(sc_loss(sa, sb))
        mag.append(mag_loss(sa, sb))
    total = w.lambda1 * l1 + w.lambda2 * sum(s + m for s, m in zip(sc, mag))
    return total, {"l1": l1, "sc": sc, "mag": mag}


def _magnitude_tensor(x, cfg: StftConfig) -> Tensor:
    re, im = stft_tensor(x, cfg)                              # (B, T, F)
    shape = (1,) + re.shape
    return ad.complex_magnitude(ad.concat([ad.reshape(re, shape), ad.reshape(im, shape)], axis=0), axis=0)


def total_loss_tensor(x: np.ndarray, x_hat: Tensor, w: LossWeights = LossWeights(), mr: MrStftConfig = MrStftConfig()):
    """Differentiable objective for a batch ``(B, N)``; returns ``(loss, breakdown)``.

    Spectral convergence is computed per example and averaged over the batch;
    the log-magnitude term is a mean over every bin of every example.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ValueError(f"shape mismatch: target {x.shape} vs estimate {x_hat.shape}")
    target = Tensor(x)
    l1 = ad.mean(ad.absolute(ad.sub(x_hat, target)))
    total = ad.mul(l1, w.lambda1)
    sc_vals, mag_vals = [], []
    for cfg in mr.stft_configs():
        with ad.no_grad():
            ref_mag = _magnitude_tensor(target, cfg).data
        est_mag = _magnitude_tensor(x_hat, cfg)
        ref_t = Tensor(ref_mag)
        norms = np.sqrt(np.sum(ref_mag**2, axis=(1, 2)))
        if np.any(norms == 0):
            raise NumericalError("spectral convergence undefined: reference magnitude is all zero")
        diff2 = ad.ops.sum(ad.mul(d := ad.sub(est_mag, ref_t), d), axis=(1, 2))
        sc = ad.mean(ad.div(ad.sqrt(diff2), Tensor(norms)))
        log_ref = Tensor(np.log(np.maximum(ref_mag, MAG_FLOOR)))
        mag = ad.mean(ad.absolute(ad.sub(ad.log(ad.clamp_min(est_mag, MAG_FLOOR)), log_ref)))
        total = ad.add(total, ad.mul(ad.add(sc, mag), w.lambda2))
        sc_vals.append(sc.item())
        mag_vals.append(mag.item())
    return total, {"l1": l1.item(), "sc": sc_vals, "mag": mag_vals}
