"""A-SPADE declipping: per-frame ADMM between DFT hard-thresholding and the clipping constraints."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .signal import ClipMask, Waveform, as_samples
from .transform import make_window


@dataclass(frozen=True)
class SpadeParams:
    frame_len: int = 1024
    hop: int = 256
    redundancy: int = 2
    sparsity_start: int = 1
    sparsity_step: int = 1
    tol: float = 0.1
    max_iters: int = 500

    def __post_init__(self):
        ints = (self.frame_len, self.hop, self.redundancy, self.sparsity_start, self.sparsity_step, self.max_iters)
        if min(ints) < 1 or not self.tol > 0:
            raise ValueError(f"A-SPADE parameters must all be positive: {self}")
        if self.hop > self.frame_len:
            raise ValueError(f"hop {self.hop} exceeds frame_len {self.frame_len}")

    @property
    def n_coef(self) -> int:
        return self.frame_len * self.redundancy


@dataclass
class SpadeReport:
    n_frames: int = 0
    n_solved: int = 0
    n_converged: int = 0
    iterations: list[int] = field(default_factory=list)
    initial_residuals: list[float] = field(default_factory=list)
    final_residuals: list[float] = field(default_factory=list)

    @property
    def all_converged(self) -> bool:
        return self.n_converged == self.n_solved


def constraint_bounds(y: np.ndarray, mask: ClipMask) -> tuple[np.ndarray, np.ndarray]:
    """Box form of the feasible set: equality on reliable samples, one-sided on clipped ones.

    The clipped bounds sit at the observed sample values, taking direction from
    the stored labels rather than from the sign of ``y``.
    """
    lower = y.copy()
    upper = y.copy()
    upper[mask.high] = np.inf
    lower[mask.low] = -np.inf
    return lower, upper


def project(x: np.ndarray, y: np.ndarray, mask: ClipMask) -> np.ndarray:
    lower, upper = constraint_bounds(y, mask)
    return np.minimum(np.maximum(x, lower), upper)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("DECLIP_NUM_THREADS", "1")))
    except ValueError:
        return 1


def declip_aspade(y, mask: ClipMask, p: SpadeParams | None = None, return_report: bool = False):
    """Declip ``y`` given its mask; returns a Waveform (and a :class:`SpadeReport` if asked)."""
    p = p or SpadeParams()
    rate = y.sample_rate if isinstance(y, Waveform) else 16000
    s = as_samples(y)
    if len(mask) != s.size:
        raise ValueError(f"mask length {len(mask)} does not match signal length {s.size}")
    if np.isfinite(mask.theta) and mask.n_clipped:
        off = np.abs(np.abs(s[mask.clipped]) - mask.theta)
        if off.max() > 1e-9 * max(1.0, mask.theta):
            raise ValueError("mask is inconsistent with y: clipped samples are not at +/-theta")
    lower, upper = constraint_bounds(s, mask)

    # zero padding on both sides (treated as reliable zeros) so every sample is
    # covered by a full set of overlapping frames
    L, hop = p.frame_len, p.hop
    n = s.size
    n_frames = -(-(n + L) // hop)
    total = (n_frames - 1) * hop + L
    pad = np.zeros(total)
    lo_p = np.zeros(total)
    hi_p = np.zeros(total)
    start = L - hop
    pad[start:start + n] = s
    lo_p[start:start + n] = lower
    hi_p[start:start + n] = upper
    clipped_p = np.zeros(total, dtype=bool)
    clipped_p[start:start + n] = mask.clipped

    win = make_window("hann", L)
    frames_out = np.empty((n_frames, L))

    def windowed(v, seg):
        # bounds scale with the (non-negative) window; infinite ones stay infinite
        w = v[seg] * np.where(np.isinf(v[seg]), 1.0, win)
        return np.where(np.isinf(v[seg]), v[seg], w)

    report = SpadeReport(n_frames=n_frames)
    todo = []
    for t in range(n_frames):
        seg = slice(t * hop, t * hop + L)
        if clipped_p[seg].any():
            todo.append(t)
        frames_out[t] = pad[seg] * win

    def solve(t):
        seg = slice(t * hop, t * hop + L)
        return _kernels.aspade_frame(pad[seg] * win, windowed(lo_p, seg), windowed(hi_p, seg), p.n_coef,
                                     p.sparsity_start, p.sparsity_step, p.max_iters, p.tol)

    workers = _workers()
    if workers > 1 and len(todo) > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(solve, todo))
    else:
        results = [solve(t) for t in todo]
    for t, (x, iters, first, best, conv) in zip(todo, results):
        frames_out[t] = x
        report.n_solved += 1
        report.n_converged += int(conv)
        report.iterations.append(int(iters))
        report.initial_residuals.append(float(first))
        report.final_residuals.append(float(best))

    # frames were analysis-windowed, so plain overlap-add divided by the window sum inverts them
    acc = _kernels.overlap_add(frames_out, hop, total)
    norm = _kernels.overlap_add(np.broadcast_to(win, (n_frames, L)), hop, total)
    region = slice(start, start + n)
    out = acc[region] / norm[region]
    out = project(out, s, mask)
    result = Waveform(out, rate)
    return (result, report) if return_report else result
