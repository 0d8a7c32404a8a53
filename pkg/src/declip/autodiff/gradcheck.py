"""Central finite-difference gradient checking."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def numerical_grad(fn: Callable[[], Tensor], param: Tensor, index, h: float = 1e-5) -> float:
    old = param.data[index]
    param.data[index] = old + h
    up = fn().item()
    param.data[index] = old - h
    down = fn().item()
    param.data[index] = old
    return (up - down) / (2.0 * h)


def max_rel_error(
    fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    h: float = 1e-5,
    n_probe: int | None = None,
    rng: np.random.Generator | None = None,
    atol: float = 1e-8,
) -> float:
    """Worst relative error between autodiff and central differences.

    ``fn`` must rebuild the graph from ``params`` on every call.  With
    ``n_probe`` set, that many entries are sampled across all parameters
    instead of checking every one.  Relative error is
    ``|a - n| / max(|a|, |n|, atol)``.
    """
    for p in params:
        p.grad = None
    fn().backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    entries = [(pi, idx) for pi, p in enumerate(params) for idx in np.ndindex(p.shape)]
    if n_probe is not None and n_probe < len(entries):
        rng = rng or np.random.default_rng(0)
        pick = rng.choice(len(entries), size=n_probe, replace=False)
        entries = [entries[i] for i in sorted(pick)]

    worst = 0.0
    for pi, idx in entries:
        num = numerical_grad(fn, params[pi], idx, h)
        ana = float(analytic[pi][idx])
        err = abs(ana - num) / max(abs(ana), abs(num), atol)
        worst = max(worst, err)
    return worst
