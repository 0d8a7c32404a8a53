"""Pure numpy versions of the hot kernels.

These define the reference behaviour; the compiled module must agree with
them to rounding error.
"""
from __future__ import annotations

import math

import numpy as np


def overlap_add(frames: np.ndarray, hop: int, out_len: int) -> np.ndarray:
    """Sum frames ``(..., T, L)`` placed every ``hop`` samples into ``(..., out_len)``.

    Samples that would land past ``out_len`` are dropped.
    """
    frames = np.asarray(frames, dtype=np.float64)
    lead = frames.shape[:-2]
    n_frames, frame_len = frames.shape[-2:]
    n_chunks = math.ceil(frame_len / hop)
    # chunk q of frame t lands on hop-block t + q, so each chunk index is one slice add
    n_blocks = max(n_frames + n_chunks, math.ceil(out_len / hop))
    acc = np.zeros(lead + (n_blocks, hop))
    for q in range(n_chunks):
        lo = q * hop
        width = min(hop, frame_len - lo)
        acc[..., q:q + n_frames, :width] += frames[..., lo:lo + width]
    return acc.reshape(lead + (n_blocks * hop,))[..., :out_len].copy()


def frame_signal(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    """Cut ``(..., N)`` into ``(..., T, frame_len)`` frames, T = (N - frame_len)//hop + 1."""
    x = np.asarray(x, dtype=np.float64)
    windows = np.lib.stride_tricks.sliding_window_view(x, frame_len, axis=-1)
    return np.ascontiguousarray(windows[..., ::hop, :])


def _full_norm(c: np.ndarray) -> float:
    # one-sided storage of a Hermitian spectrum: interior bins count twice
    e = 2.0 * np.sum(c.real**2 + c.imag**2) - abs(c[0]) ** 2 - abs(c[-1]) ** 2
    return math.sqrt(max(e, 0.0))


def aspade_frame(
    y: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    n_coef: int,
    k0: int,
    step: int,
    max_iters: int,
    tol: float,
) -> tuple[np.ndarray, int, float, float, bool]:
    """Run A-SPADE on a single frame.

    The analysis operator is the zero-padded DFT of length ``n_coef`` scaled by
    ``1/sqrt(n_coef)``, which makes it a Parseval tight frame, so the
    x-update reduces to projecting its adjoint onto the box ``[lower, upper]``.
    Coefficients are held one-sided; hard thresholding keeps the ``k``
    largest one-sided magnitudes and ``k`` grows by ``step`` each iteration.

    Returns ``(x, iterations, initial_residual, best_residual, converged)``.
    """
    y = np.asarray(y, dtype=np.float64)
    frame_len = y.size
    scale = 1.0 / math.sqrt(n_coef)
    n_bins = n_coef // 2 + 1

    def analysis(v):
        return np.fft.rfft(v, n_coef) * scale

    def synthesis(c):
        return np.fft.irfft(c, n_coef)[:frame_len] * (n_coef * scale)

    x = np.clip(y, lower, upper)
    u = np.zeros(n_bins, dtype=np.complex128)
    k = k0
    best_x = x
    best_res = math.inf
    first_res = math.inf
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        a = analysis(x) + u
        z = np.zeros_like(a)
        if k >= n_bins:
            z[:] = a
        else:
            keep = np.argpartition(np.abs(a), n_bins - k)[n_bins - k:]
            z[keep] = a[keep]
        x = np.clip(synthesis(z - u), lower, upper)
        r = analysis(x) - z
        res = _full_norm(r)
        if it == 1:
            first_res = res
        if res < best_res:
            best_res = res
            best_x = x
        if res <= tol:
            converged = True
            break
        u = u + r
        k += step
    return best_x, it, first_res, best_res, converged
