"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from declip._kernels import _pykernels

try:
    from declip._kernels import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases(rng):
    frames = rng.standard_normal((8, 501, 128))
    yield "overlap_add 8x501x128", lambda m: m.overlap_add(frames, 32, 16128)

    t = np.arange(1024) / 16000
    x = np.sin(2 * np.pi * 440 * t) + 0.5 * np.sin(2 * np.pi * 1230 * t)
    theta = 0.6
    y = np.clip(x, -theta, theta)
    lower = np.where(y >= theta, theta, np.where(y <= -theta, -np.inf, y))
    upper = np.where(y <= -theta, -theta, np.where(y >= theta, np.inf, y))
    # fixed iteration count: tol 0 never triggers early exit
    yield "aspade_frame 1024/2048 x200", lambda m: m.aspade_frame(y, lower, upper, 2048, 1, 1, 200, 0.0)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':<30}{'python (ms)':>14}{'cython (ms)':>14}{'speedup':>10}")
    for name, run in cases(rng):
        tp = best_of(lambda: run(_pykernels), args.repeat)
        if _ckernels is None:
            print(f"{name:<30}{tp * 1e3:>14.2f}{'n/a':>14}{'':>10}")
            continue
        tc = best_of(lambda: run(_ckernels), args.repeat)
        print(f"{name:<30}{tp * 1e3:>14.2f}{tc * 1e3:>14.2f}{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
