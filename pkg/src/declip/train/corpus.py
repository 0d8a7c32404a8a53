"""Seeded synthetic speech-like corpus, optionally materialised as WAV folders."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal as sps

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class CorpusSpec:
    n_train: int = 200
    n_val: int = 20
    n_test: int = 20
    seconds_per_clip: float = 1.0
    sample_rate: int = 16000
    seed: int = 0
    # clip peaks are log-uniform in this range, so some clips sit near the
    # training clip thresholds and arrive lightly clipped
    peak_range: tuple[float, float] = (0.2, 1.0)

    def __post_init__(self):
        if min(self.n_train, self.n_val, self.n_test) < 1:
            raise ValueError("corpus split sizes must be positive")
        if self.seconds_per_clip <= 0 or self.sample_rate <= 0:
            raise ValueError("clip duration and sample rate must be positive")
        lo, hi = self.peak_range
        if not 0 < lo <= hi <= 1:
            raise ValueError(f"peak_range must satisfy 0 < lo <= hi <= 1, got {self.peak_range}")

    @property
    def n_samples(self) -> int:
        return int(round(self.seconds_per_clip * self.sample_rate))

    def count(self, split: str) -> int:
        return {"train": self.n_train, "val": self.n_val, "test": self.n_test}[split]


def _smooth_curve(rng, n: int, n_knots: int, lo: float, hi: float) -> np.ndarray:
    knots = rng.uniform(lo, hi, size=n_knots)
    return np.interp(np.linspace(0, n_knots - 1, n), np.arange(n_knots), knots)


def synth_utterance(rng: np.random.Generator, n: int, sr: int) -> np.ndarray:
    """Voiced harmonic stacks with gliding pitch and formant-like weighting,
    interleaved with filtered-noise bursts and short pauses."""
    t = np.arange(n) / sr
    out = np.zeros(n)
    pos = 0
    while pos < n:
        seg = int(rng.uniform(0.08, 0.3) * sr)
        end = min(n, pos + seg)
        m = end - pos
        kind = rng.choice(["voiced", "voiced", "voiced", "noise", "pause"])
        if kind == "voiced":
            f0 = _smooth_curve(rng, m, 4, 90.0, 260.0)
            phase = 2 * np.pi * np.cumsum(f0) / sr
            formants = rng.uniform([300, 900, 2000], [900, 2200, 3500])
            seg_sig = np.zeros(m)
            for h in range(1, 30):
                fh = h * f0.mean()
                if fh > 0.45 * sr:
                    break
                gain = sum(np.exp(-0.5 * ((fh - fc) / 150.0) ** 2) for fc in formants) + 0.05 / h
                seg_sig += gain * np.sin(h * phase + rng.uniform(0, 2 * np.pi))
        elif kind == "noise":
            lo = rng.uniform(1000, 3000)
            b, a = sps.butter(2, [lo / (sr / 2), min(0.95, (lo + 3000) / (sr / 2))], btype="band")
            seg_sig = 0.5 * sps.lfilter(b, a, rng.standard_normal(m))
        else:
            seg_sig = 0.01 * rng.standard_normal(m)
        env = _smooth_curve(rng, m, 3, 0.3, 1.0) * np.hanning(m) ** 0.5
        out[pos:end] += seg_sig * env
        pos = end
    # slow syllabic amplitude modulation
    out *= 0.6 + 0.4 * np.sin(2 * np.pi * rng.uniform(2, 6) * t + rng.uniform(0, 2 * np.pi))
    return out


def make_clip(spec: CorpusSpec, split: str, index: int) -> np.ndarray:
    """Clip ``index`` of ``split``; depends only on (seed, split, index)."""
    split_id = SPLITS.index(split)
    rng = np.random.default_rng([spec.seed, split_id, index])
    x = synth_utterance(rng, spec.n_samples, spec.sample_rate)
    peak = np.max(np.abs(x))
    if peak == 0:
        x[0] = 1.0
        peak = 1.0
    lo, hi = np.log(spec.peak_range)
    return x * (np.exp(rng.uniform(lo, hi)) / peak)


def generate_split(spec: CorpusSpec, split: str) -> np.ndarray:
    """``(count, n_samples)`` array for one split."""
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}; expected one of {SPLITS}")
    return np.stack([make_clip(spec, split, i) for i in range(spec.count(split))])


def materialize(spec: CorpusSpec, root) -> Path:
    """Write ``root/{train,val,test}/NNNN.wav`` (float32)."""
    from ..wavio import write_wav

    root = Path(root)
    for split in SPLITS:
        d = root / split
        d.mkdir(parents=True, exist_ok=True)
        for i in range(spec.count(split)):
            write_wav(d / f"{i:04d}.wav", make_clip(spec, split, i), spec.sample_rate, fmt="float32")
    return root


def load_split(root, split: str, sample_rate: int = 16000) -> list[np.ndarray]:
    """Read a materialised (or real) corpus split in file-name order."""
    from ..wavio import read_wav

    files = sorted((Path(root) / split).glob("*.wav"))
    if not files:
        raise FileNotFoundError(f"no WAV files under {Path(root) / split}")
    return [read_wav(f, expected_rate=sample_rate)[0] for f in files]
