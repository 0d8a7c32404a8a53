"""Hot kernels: compiled core when available, numpy fallback otherwise.

Set ``DECLIP_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("DECLIP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels


def overlap_add(frames: np.ndarray, hop: int, out_len: int) -> np.ndarray:
    """Overlap-add ``(..., T, L)`` frames with stride ``hop`` into ``(..., out_len)``."""
    frames = np.asarray(frames, dtype=np.float64)
    if _impl is _pykernels:
        return _pykernels.overlap_add(frames, hop, out_len)
    lead = frames.shape[:-2]
    flat = np.ascontiguousarray(frames.reshape((-1,) + frames.shape[-2:]))
    return _impl.overlap_add(flat, int(hop), int(out_len)).reshape(lead + (out_len,))


frame_signal = _pykernels.frame_signal


def aspade_frame(y, lower, upper, n_coef, k0, step, max_iters, tol):
    """Solve one A-SPADE frame; see ``_pykernels.aspade_frame``."""
    args = [np.ascontiguousarray(a, dtype=np.float64) for a in (y, lower, upper)]
    return _impl.aspade_frame(*args, int(n_coef), int(k0), int(step), int(max_iters), float(tol))


__all__ = ["BACKEND", "overlap_add", "frame_signal", "aspade_frame"]
