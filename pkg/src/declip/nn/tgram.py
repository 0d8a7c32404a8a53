"""TgramNet: learnable temporal features shaped like the complex spectrogram."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..transform import StftConfig, pad_reflect
from .module import Conv1d, Module


@dataclass(frozen=True)
class TgramConfig:
    f_bins: int
    win_length: int
    hop: int
    n_refine_layers: int = 3
    leaky_slope: float = 0.01

    @classmethod
    def from_stft(cls, cfg: StftConfig, **kw) -> "TgramConfig":
        return cls(f_bins=cfg.n_bins, win_length=cfg.win_length, hop=cfg.hop, **kw)

    def check_against(self, cfg: StftConfig) -> None:
        want = (cfg.n_bins, cfg.win_length, cfg.hop)
        have = (self.f_bins, self.win_length, self.hop)
        if have != want:
            raise ValueError(
                f"TgramNet (F, win, hop)={have} does not match STFT (F, win, hop)={want}"
            )
        if not cfg.center_pad:
            raise ValueError("TgramNet frame alignment assumes a centre-padded STFT")


class TgramNet(Module):
    """Strided conv with one kernel per frequency bin, then [leaky ReLU -> conv(k=3)] x n.

    There is deliberately no normalisation layer, so any input length works.
    """

    def __init__(self, cfg: TgramConfig, rng: np.random.Generator):
        super().__init__()
        self.cfg = cfg
        # variance-preserving init (uniform bound sqrt(3) * std): without a norm layer the
        # default bound shrinks the output about 150x below the spectrogram channels
        self.front = Conv1d(1, cfg.f_bins, cfg.win_length, rng, stride=cfg.hop, gain=math.sqrt(3.0))
        relu_gain = math.sqrt(6.0 / (1.0 + cfg.leaky_slope**2))
        self.refine = []
        for i in range(cfg.n_refine_layers):
            layer = Conv1d(cfg.f_bins, cfg.f_bins, 3, rng, padding=1, gain=relu_gain)
            setattr(self, f"refine{i}", layer)
            self.refine.append(layer)

    def layer_kinds(self) -> list[str]:
        kinds = ["conv1d"]
        for _ in self.refine:
            kinds += ["leaky_relu", "conv1d"]
        return kinds

    def __call__(self, y: Tensor) -> Tensor:
        """``(B, N)`` waveform -> ``(B, 1, F, T)`` features."""
        if y.ndim != 2:
            raise ValueError(f"TgramNet expects (B, N) input, got {y.shape}")
        b = y.shape[0]
        x = pad_reflect(y, self.cfg.win_length // 2)
        h = self.front(ad.reshape(x, (b, 1, x.shape[-1])))
        for layer in self.refine:
            h = layer(ad.leaky_relu(h, self.cfg.leaky_slope))
        return ad.reshape(h, (b, 1) + h.shape[1:])
