"""Waveforms, hard clipping and clipping masks."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import UnreachableTargetError

DEFAULT_SAMPLE_RATE = 16000


class Label(enum.IntEnum):
    RELIABLE = 0
    CLIPPED_HIGH = 1
    CLIPPED_LOW = 2


@dataclass(frozen=True)
class Waveform:
    """Mono float64 signal with its sample rate."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        s = np.array(self.samples, dtype=np.float64).reshape(-1)
        if s.size < 1:
            raise ValueError("waveform must contain at least one sample")
        if not np.all(np.isfinite(s)):
            raise ValueError("waveform contains NaN or Inf")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate}")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    def __array__(self, dtype=None, copy=None):
        return self.samples if dtype is None else self.samples.astype(dtype)


@dataclass(frozen=True)
class ClipMask:
    """Per-sample labels (see :class:`Label`) plus the threshold that produced them."""

    labels: np.ndarray
    theta: float = field(default=math.inf)

    def __post_init__(self):
        lab = np.array(self.labels, dtype=np.uint8).reshape(-1)
        if lab.size and lab.max() > 2:
            raise ValueError("mask labels must be 0 (reliable), 1 (clipped high) or 2 (clipped low)")
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)

    def __len__(self) -> int:
        return self.labels.size

    @property
    def reliable(self) -> np.ndarray:
        return self.labels == Label.RELIABLE

    @property
    def high(self) -> np.ndarray:
        return self.labels == Label.CLIPPED_HIGH

    @property
    def low(self) -> np.ndarray:
        return self.labels == Label.CLIPPED_LOW

    @property
    def clipped(self) -> np.ndarray:
        return self.labels != Label.RELIABLE

    @property
    def n_clipped(self) -> int:
        return int(np.count_nonzero(self.labels))


def as_samples(x) -> np.ndarray:
    if isinstance(x, Waveform):
        return x.samples
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if arr.size < 1:
        raise ValueError("signal must contain at least one sample")
    if not np.all(np.isfinite(arr)):
        raise ValueError("signal contains NaN or Inf")
    return arr


def _rate(x) -> int:
    return x.sample_rate if isinstance(x, Waveform) else DEFAULT_SAMPLE_RATE


def _check_theta(theta: float) -> float:
    theta = float(theta)
    if not theta > 0 or math.isnan(theta):
        raise ValueError(f"clipping threshold must be positive, got {theta}")
    return theta


def clip(x, theta: float) -> tuple[Waveform, ClipMask]:
    """Hard-clip ``x`` at +/-theta.

    Samples with ``|x| <= theta`` pass through unchanged and are labelled
    reliable; the rest become ``theta * sign(x)``.
    """
    theta = _check_theta(theta)
    s = as_samples(x)
    high = s > theta
    low = s < -theta
    y = np.where(high, theta, np.where(low, -theta, s))
    labels = np.zeros(s.size, dtype=np.uint8)
    labels[high] = Label.CLIPPED_HIGH
    labels[low] = Label.CLIPPED_LOW
    return Waveform(y, _rate(x)), ClipMask(labels, theta)


def mask_from_clipped(y, theta: float, eps: float = 0.0) -> ClipMask:
    """Infer the mask from a clipped signal alone: ``|y| >= theta - eps`` counts as clipped."""
    theta = _check_theta(theta)
    if eps < 0:
        raise ValueError(f"eps must be non-negative, got {eps}")
    s = as_samples(y)
    level = theta - eps
    labels = np.zeros(s.size, dtype=np.uint8)
    labels[s >= level] = Label.CLIPPED_HIGH
    labels[s <= -level] = Label.CLIPPED_LOW
    if level <= 0:
        # zero would satisfy both tests; give it no label rather than a wrong sign
        labels[s == 0] = Label.RELIABLE
    return ClipMask(labels, theta)


def find_threshold(x, target_sdr: float, tol: float = 0.01, max_iter: int = 100) -> float:
    """Bisection for the theta whose clipped signal has SDR within ``tol`` dB of the target.

    SDR(theta) rises monotonically from 0 dB (theta -> 0) to +inf
    (theta = max|x|), so any finite target > 0 is reachable; ``inf`` returns
    ``max|x|``.
    """
    from .metrics import sdr

    s = as_samples(x)
    peak = float(np.max(np.abs(s)))
    if peak == 0.0:
        raise ValueError("cannot clip a silent signal to a target SDR")
    target = float(target_sdr)
    if math.isnan(target):
        raise ValueError("target SDR is NaN")
    if target == math.inf:
        return peak
    if target <= 0.0 or target == -math.inf:
        raise UnreachableTargetError(target, 0.0, math.inf)

    lo, hi = 0.0, peak
    theta = 0.5 * peak
    for _ in range(max_iter):
        theta = 0.5 * (lo + hi)
        y, _mask = clip(s, theta)
        got = sdr(s, y.samples)
        if abs(got - target) <= tol:
            return theta
        if got < target:
            lo = theta
        else:
            hi = theta
    return theta
