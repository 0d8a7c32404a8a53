"""Training loop with per-epoch validation and best-checkpoint selection."""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import autodiff as ad
from ..errors import NumericalError
from ..metrics import LossWeights, MrStftConfig, total_loss_tensor
from ..nn import DeclipModel, save_checkpoint
from ..signal import ClipMask, Waveform, clip
from .optim import AdamW


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 3e-3
    batch: int = 4
    epochs: int = 20
    weight_decay: float = 0.01
    theta_range: tuple[float, float] = (0.01, 0.125)
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0
    # random training crop per clip and epoch; validation uses fixed crops
    crop: int = 1024
    val_crop: int = 2048
    patience: int = 10
    smooth: int = 3
    # global gradient-norm clip; 0 disables
    grad_clip: float = 1.0

    def __post_init__(self):
        if not self.lr >= 0:
            raise ValueError(f"learning rate must be non-negative, got {self.lr}")
        lo, hi = self.theta_range
        if not 0 < lo <= hi:
            raise ValueError(f"theta_range must be positive and ordered, got {self.theta_range}")
        if not self.grad_clip >= 0:
            raise ValueError(f"grad_clip must be non-negative, got {self.grad_clip}")
        if min(self.batch, self.epochs, self.crop, self.val_crop, self.patience, self.smooth) < 1:
            raise ValueError("batch, epochs, crop sizes, patience and smooth must be positive")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_l1: float
    val_sc: float
    val_mag: float
    seconds: float


@dataclass
class TrainReport:
    records: list[EpochRecord]
    best_epoch: int
    best_val: float
    stopped: str = "completed"

    @property
    def val_losses(self) -> list[float]:
        return [r.val_loss for r in self.records]

    def lines(self) -> list[str]:
        return [json.dumps(asdict(r), sort_keys=True) for r in self.records]


def sample_clip_pair(x, rng: np.random.Generator, theta_range=(0.01, 0.125)) -> tuple[Waveform, Waveform, ClipMask, float]:
    """Draw theta uniformly (linear scale) and clip; returns ``(y, x, mask, theta)``."""
    theta = float(rng.uniform(*theta_range))
    xw = x if isinstance(x, Waveform) else Waveform(x)
    y, mask = clip(xw, theta)
    return y, xw, mask, theta


def select_best(val_losses) -> int:
    """1-based epoch of the lowest validation loss (earliest on ties)."""
    vals = np.asarray(val_losses, dtype=np.float64)
    if vals.size == 0:
        raise ValueError("no validation losses to select from")
    if np.all(np.isnan(vals)):
        raise ValueError("every validation loss is NaN")
    return int(np.nanargmin(vals)) + 1


def smoothed(values, window: int = 3) -> np.ndarray:
    """Trailing moving average (shorter window at the start)."""
    v = np.asarray(values, dtype=np.float64)
    c = np.concatenate([[0.0], np.cumsum(v)])
    idx = np.arange(1, v.size + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def clip_grad_norm(params, max_norm: float) -> float:
    """Rescale gradients in place so their global L2 norm is at most ``max_norm``."""
    grads = [p.grad for p in params if p.grad is not None]
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if np.isfinite(norm) and norm > max_norm:
        for g in grads:
            g *= max_norm / norm
    return norm


def _crop(x: np.ndarray, length: int, rng) -> np.ndarray:
    if x.size <= length:
        return np.pad(x, (0, length - x.size))
    start = int(rng.integers(0, x.size - length + 1))
    return x[start:start + length]


def make_validation_set(clips, cfg: TrainConfig) -> tuple[np.ndarray, np.ndarray]:
    """Fixed (clean, clipped) validation crops, independent of the training RNG stream."""
    rng = np.random.default_rng([cfg.seed, 7])
    xs, ys = [], []
    for x in clips:
        c = _crop(np.asarray(x, dtype=np.float64), cfg.val_crop, rng)
        y, _, _, _ = sample_clip_pair(c, rng, cfg.theta_range)
        xs.append(c)
        ys.append(y.samples)
    return np.stack(xs), np.stack(ys)


def evaluate_loss(model: DeclipModel, x: np.ndarray, y: np.ndarray, cfg: TrainConfig, mr: MrStftConfig, chunk: int = 4):
    """Mean composite loss (and its terms) over a fixed set, batched by ``chunk``."""
    tot = l1 = sc = mag = 0.0
    n = x.shape[0]
    with ad.no_grad():
        for i in range(0, n, chunk):
            xb, yb = x[i:i + chunk], y[i:i + chunk]
            out = model(yb)
            loss, parts = total_loss_tensor(xb, out, cfg.weights, mr)
            w = xb.shape[0] / n
            tot += w * float(loss.data)
            l1 += w * parts["l1"]
            sc += w * sum(parts["sc"])
            mag += w * sum(parts["mag"])
    return tot, l1, sc, mag


def _snapshot(model: DeclipModel) -> dict[str, np.ndarray]:
    return {k: p.data.copy() for k, p in model.named_parameters()}


def _restore(model: DeclipModel, snap: dict[str, np.ndarray]) -> None:
    for k, p in model.named_parameters():
        p.data = snap[k].copy()


def train(model: DeclipModel, train_clips, val_clips, cfg: TrainConfig | None = None,
          checkpoint: str | Path | None = None, report_path: str | Path | None = None,
          log=None) -> TrainReport:
    """Train in place; the model ends holding the best-validation parameters."""
    cfg = cfg or TrainConfig()
    train_clips = [np.asarray(c, dtype=np.float64) for c in train_clips]
    if not train_clips or len(val_clips) == 0:
        raise ValueError("training and validation sets must be non-empty")
    mr = MrStftConfig()
    opt = AdamW(model.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
    rng = np.random.default_rng(cfg.seed)
    xv, yv = make_validation_set(val_clips, cfg)

    records: list[EpochRecord] = []
    best_val, best_epoch, best = np.inf, 0, _snapshot(model)
    stopped = "completed"
    report_fh = open(report_path, "w") if report_path else None
    try:
        for epoch in range(1, cfg.epochs + 1):
            t0 = time.perf_counter()
            order = rng.permutation(len(train_clips))
            batch_losses = []
            try:
                for i in range(0, len(order), cfg.batch):
                    xs, ys = [], []
                    for j in order[i:i + cfg.batch]:
                        c = _crop(train_clips[j], cfg.crop, rng)
                        y, _, _, _ = sample_clip_pair(c, rng, cfg.theta_range)
                        xs.append(c)
                        ys.append(y.samples)
                    xb = np.stack(xs)
                    model.zero_grad()
                    loss, _ = total_loss_tensor(xb, model(np.stack(ys)), cfg.weights, mr)
                    ad.backward(loss)
                    if cfg.grad_clip > 0:
                        clip_grad_norm(model.parameters(), cfg.grad_clip)
                    opt.step()
                    batch_losses.append(float(loss.data))
                val = evaluate_loss(model, xv, yv, cfg, mr)
            except NumericalError as exc:
                stopped = f"diverged at epoch {epoch}: {exc}"
                break
            if not np.isfinite(val[0]):
                stopped = f"diverged at epoch {epoch}: validation loss {val[0]}"
                break
            rec = EpochRecord(epoch, float(np.mean(batch_losses)), *val, seconds=time.perf_counter() - t0)
            records.append(rec)
            if report_fh:
                report_fh.write(json.dumps(asdict(rec), sort_keys=True) + "\n")
                report_fh.flush()
            if log:
                log(f"epoch {epoch:3d}  train {rec.train_loss:.4f}  val {rec.val_loss:.4f}  ({rec.seconds:.1f}s)")
            if rec.val_loss < best_val:
                best_val, best_epoch, best = rec.val_loss, epoch, _snapshot(model)
                if checkpoint:
                    _save(model, checkpoint, cfg, best_epoch, best_val)
            elif epoch - best_epoch >= cfg.patience:
                stopped = f"early stop at epoch {epoch} (no improvement for {cfg.patience} epochs)"
                break
    finally:
        if report_fh:
            report_fh.close()
    _restore(model, best)
    if checkpoint and best_epoch == 0:
        _save(model, checkpoint, cfg, 0, float("nan"))
    return TrainReport(records, best_epoch, float(best_val), stopped)


def _save(model, path, cfg: TrainConfig, epoch: int, val: float) -> None:
    # metadata holds no timings so identical runs give identical files
    meta = {"best_epoch": epoch, "best_val_loss": val, "train_config": _config_dict(cfg)}
    save_checkpoint(model, path, meta)


def _config_dict(cfg: TrainConfig) -> dict:
    d = asdict(cfg)
    d["theta_range"] = list(cfg.theta_range)
    return d
