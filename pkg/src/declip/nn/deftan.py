"""Encoder / F- and T-transformer blocks / decoder declipper.

Shapes follow ``(B, C, F, T)`` throughout.  The block internals are a
desk-scale variant: pre-norm multi-head self-attention along one axis plus a
position-wise feed-forward, once over frequency (per frame) and once over
time (per bin).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..errors import ConfigError, NumericalError
from ..signal import Waveform, as_samples
from ..transform import StftConfig, istft_tensor, stft_array
from .module import Conv2d, LayerNorm, Linear, Module, PReLU
from .tgram import TgramConfig, TgramNet

NORM_FLOOR = 1e-8


@dataclass(frozen=True)
class ModelConfig:
    channels: int = 16
    n_blocks: int = 2
    n_heads: int = 4
    sdb_groups: int = 4
    ffn_mult: int = 2
    stft: StftConfig = field(default_factory=lambda: StftConfig(128, hop=32))
    tgram: TgramConfig | None = None
    # False zeroes the temporal-feature channel (spectrogram-only ablation)
    use_tgram: bool = True
    # run the network on y / rms(y) and rescale the output
    normalize_input: bool = True
    # decoder predicts a correction added to the input spectrogram
    residual: bool = True
    sample_rate: int = 16000
    seed: int = 0

    def __post_init__(self):
        if self.tgram is None:
            object.__setattr__(self, "tgram", TgramConfig.from_stft(self.stft))
        self.tgram.check_against(self.stft)
        c = self.channels
        if c % self.n_heads or c % self.sdb_groups:
            raise ValueError(f"channels={c} must be divisible by n_heads={self.n_heads} and sdb_groups={self.sdb_groups}")
        if min(self.n_blocks, self.n_heads, self.sdb_groups, self.ffn_mult) < 1:
            raise ValueError("block, head, group and ffn counts must be positive")

    @classmethod
    def full_scale(cls, **kw) -> "ModelConfig":
        """Width 64 with the 512/128 STFT (block count stays a free choice)."""
        kw.setdefault("channels", 64)
        kw.setdefault("stft", StftConfig(512, hop=128))
        return cls(**kw)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["stft"] = StftConfig(**d["stft"])
        d["tgram"] = TgramConfig(**d["tgram"]) if d.get("tgram") else None
        return cls(**d)


class SplitDenseBlock(Module):
    """Channels split into groups; group g convolves [x_g, out_0 .. out_{g-1}].

    Each group conv is 3x3 followed by PReLU; the concatenated group outputs
    are added back onto the block input.
    """

    def __init__(self, channels: int, groups: int, rng):
        super().__init__()
        self.groups = groups
        self.width = channels // groups
        self.convs, self.acts = [], []
        for g in range(groups):
            conv = Conv2d(self.width * (g + 1), self.width, 3, rng, padding=1)
            act = PReLU(self.width)
            setattr(self, f"conv{g}", conv)
            setattr(self, f"act{g}", act)
            self.convs.append(conv)
            self.acts.append(act)

    def __call__(self, x: Tensor) -> Tensor:
        w = self.width
        outs: list[Tensor] = []
        for g, (conv, act) in enumerate(zip(self.convs, self.acts)):
            part = x[:, g * w:(g + 1) * w]
            inp = ad.concat([part] + outs, axis=1) if outs else part
            outs.append(act(conv(inp)))
        return ad.add(x, ad.concat(outs, axis=1))


class AxisTransformer(Module):
    """Pre-norm MHSA + feed-forward over sequences ``(N, L, C)``."""

    def __init__(self, channels: int, n_heads: int, ffn_mult: int, rng):
        super().__init__()
        self.n_heads = n_heads
        self.norm1 = LayerNorm(channels)
        self.qkv = Linear(channels, 3 * channels, rng)
        self.proj = Linear(channels, channels, rng)
        self.norm2 = LayerNorm(channels)
        self.ff1 = Linear(channels, ffn_mult * channels, rng)
        self.act = PReLU(ffn_mult * channels, axis=-1)
        self.ff2 = Linear(ffn_mult * channels, channels, rng)
        self.record_attention = False
        self.last_attention: np.ndarray | None = None

    def attention(self, x: Tensor) -> Tensor:
        n, length, c = x.shape
        h = self.n_heads
        d = c // h
        qkv = ad.reshape(self.qkv(self.norm1(x)), (n, length, 3, h, d))
        qkv = ad.transpose(qkv, (2, 0, 3, 1, 4))                   # (3, N, h, L, d)
        q, k, v = qkv[0], qkv[1], qkv[2]
        ctx, weights = ad.attention(q, k, v, 1.0 / math.sqrt(d))
        if self.record_attention:
            self.last_attention = weights
        ctx = ad.transpose(ctx, (0, 2, 1, 3))                        # (N, L, h, d)
        return self.proj(ad.reshape(ctx, (n, length, c)))

    def __call__(self, x: Tensor) -> Tensor:
        x = ad.add(x, self.attention(x))
        return ad.add(x, self.ff2(self.act(self.ff1(self.norm2(x)))))


class DualAxisBlock(Module):
    """F-transformer (attend across bins within a frame) then T-transformer (across frames per bin)."""

    def __init__(self, cfg: ModelConfig, rng):
        super().__init__()
        self.f_attn = AxisTransformer(cfg.channels, cfg.n_heads, cfg.ffn_mult, rng)
        self.t_attn = AxisTransformer(cfg.channels, cfg.n_heads, cfg.ffn_mult, rng)

    def freq_pass(self, h: Tensor) -> Tensor:
        b, c, f, t = h.shape
        seq = ad.reshape(ad.transpose(h, (0, 3, 2, 1)), (b * t, f, c))
        out = ad.reshape(self.f_attn(seq), (b, t, f, c))
        return ad.transpose(out, (0, 3, 2, 1))

    def time_pass(self, h: Tensor) -> Tensor:
        b, c, f, t = h.shape
        seq = ad.reshape(ad.transpose(h, (0, 2, 3, 1)), (b * f, t, c))
        out = ad.reshape(self.t_attn(seq), (b, f, t, c))
        return ad.transpose(out, (0, 3, 1, 2))

    def __call__(self, h: Tensor) -> Tensor:
        return self.time_pass(self.freq_pass(h))


class DeclipModel(Module):
    """TgramNet + encoder + dual-axis transformer blocks + decoder, waveform in/out."""

    def __init__(self, config: ModelConfig | None = None):
        super().__init__()
        cfg = config or ModelConfig()
        self.config = cfg
        rng = np.random.default_rng(cfg.seed)
        self.tgram = TgramNet(cfg.tgram, rng)
        self.up_conv = Conv2d(3, cfg.channels, 3, rng, padding=1)
        self.enc_sdb = SplitDenseBlock(cfg.channels, cfg.sdb_groups, rng)
        self.blocks = []
        for i in range(cfg.n_blocks):
            blk = DualAxisBlock(cfg, rng)
            setattr(self, f"block{i}", blk)
            self.blocks.append(blk)
        self.dec_sdb = SplitDenseBlock(cfg.channels, cfg.sdb_groups, rng)
        self.down_conv = Conv2d(cfg.channels, 2, 3, rng, padding=1, transpose=True)
        if cfg.residual:
            # start as the identity map; the correction branch is learned from zero
            self.down_conv.weight.data = np.zeros_like(self.down_conv.weight.data)

    # -- stages ----------------------------------------------------------------
    def features(self, y: np.ndarray) -> tuple[Tensor, Tensor]:
        """Spectrogram ``(B, 2, F, T)`` and temporal features ``(B, 1, F, T)``."""
        spec = Tensor(stft_array(y, self.config.stft))
        if self.config.use_tgram:
            temporal = self.tgram(Tensor(y))
        else:
            b, _, f, t = spec.shape
            temporal = Tensor(np.zeros((b, 1, f, t)))
        return spec, temporal

    def encoder(self, x_in: Tensor) -> Tensor:
        if x_in.ndim != 4 or x_in.shape[1] != 3:
            raise ValueError(f"encoder expects (B, 3, F, T), got {x_in.shape}")
        return self.enc_sdb(self.up_conv(x_in))

    def block(self, h: Tensor, index: int) -> Tensor:
        out = self.blocks[index](h)
        if not np.all(np.isfinite(out.data)):
            raise NumericalError(f"non-finite activations after transformer block {index}")
        return out

    def decoder(self, h: Tensor) -> Tensor:
        if h.ndim != 4 or h.shape[1] != self.config.channels:
            raise ValueError(f"decoder expects (B, {self.config.channels}, F, T), got {h.shape}")
        return self.down_conv(self.dec_sdb(h))

    def forward(self, y: np.ndarray) -> Tensor:
        """Batch of clipped waveforms ``(B, N)`` -> declipped ``(B, N)`` Tensor."""
        y = np.asarray(y, dtype=np.float64)
        if y.ndim == 1:
            y = y[None]
        n = y.shape[-1]
        scale = None
        if self.config.normalize_input:
            scale = np.sqrt(np.mean(y * y, axis=-1, keepdims=True)) + NORM_FLOOR
            y = y / scale
        spec, temporal = self.features(y)
        h = self.encoder(assemble_input(spec, temporal))
        for i in range(len(self.blocks)):
            h = self.block(h, i)
        est = self.decoder(h)
        if self.config.residual:
            est = ad.add(est, spec)
        out = istft_tensor(est, self.config.stft, n)
        if scale is not None:
            out = ad.mul(out, ad.expand(Tensor(scale), out.shape))
        return out

    __call__ = forward

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())


def assemble_input(spec: Tensor, temporal: Tensor) -> Tensor:
    """Concatenate [real, imag] with the temporal features along channels -> ``(B, 3, F, T)``."""
    if spec.ndim == 3:
        spec = ad.reshape(spec, (1,) + spec.shape)
    if temporal.ndim == 3:
        temporal = ad.reshape(temporal, (1,) + temporal.shape)
    if spec.shape[1] != 2 or temporal.shape[1] != 1 or spec.shape[2:] != temporal.shape[2:] or spec.shape[0] != temporal.shape[0]:
        raise ValueError(f"assemble_input: shape mismatch spectrogram {spec.shape} vs temporal {temporal.shape}")
    return ad.concat([spec, temporal], axis=1)


def declip_forward(model: DeclipModel, y) -> Waveform:
    """Declip one waveform in inference mode."""
    rate = y.sample_rate if isinstance(y, Waveform) else model.config.sample_rate
    if rate != model.config.sample_rate:
        raise ConfigError(f"input sample rate {rate} Hz differs from the model's {model.config.sample_rate} Hz")
    samples = as_samples(y)
    with ad.no_grad():
        out = model.forward(samples[None])
    return Waveform(out.data[0], rate)
