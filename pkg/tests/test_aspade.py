import numpy as np
import pytest

from declip import _kernels
from declip._kernels import _pykernels
from declip.aspade import SpadeParams, constraint_bounds, declip_aspade, project
from declip.metrics import sdr_c
from declip.signal import ClipMask, clip, find_threshold


def three_sines(seed, n=16000, fs=16000):
    rng = np.random.default_rng(seed)
    t = np.arange(n) / fs
    return sum(rng.uniform(0.2, 1.0) * np.sin(2 * np.pi * rng.uniform(100, 2000) * t + rng.uniform(0, 2 * np.pi))
               for _ in range(3))


def test_unclipped_input_is_returned_exactly():
    x = three_sines(0, 3000)
    mask = ClipMask(np.zeros(x.size, dtype=np.uint8))
    out, rep = declip_aspade(x, mask, return_report=True)
    assert out.samples.tobytes() == x.tobytes()
    assert rep.n_solved == 0


def test_output_is_feasible():
    x = three_sines(1, 4000)
    y, mask = clip(x, 0.5 * np.max(np.abs(x)))
    out = declip_aspade(y, mask, SpadeParams(max_iters=60)).samples
    rel = mask.reliable
    assert out[rel].tobytes() == y.samples[rel].tobytes()
    assert np.all(out[mask.high] >= mask.theta - 1e-9)
    assert np.all(out[mask.low] <= -mask.theta + 1e-9)


def test_improves_clipped_region_on_sparse_signal():
    x = three_sines(2)
    y, mask = clip(x, find_threshold(x, 15.0))
    out = declip_aspade(y, mask)
    assert sdr_c(x, out, mask) > sdr_c(x, y, mask) + 3.0


def test_residual_does_not_grow():
    x = three_sines(3, 4000)
    y, mask = clip(x, find_threshold(x, 7.0))
    _, rep = declip_aspade(y, mask, SpadeParams(max_iters=100), return_report=True)
    assert rep.n_solved > 0
    assert all(f <= i + 1e-12 for i, f in zip(rep.initial_residuals, rep.final_residuals))


def test_deterministic():
    x = three_sines(4, 3000)
    y, mask = clip(x, 0.6)
    a = declip_aspade(y, mask, SpadeParams(max_iters=40)).samples
    b = declip_aspade(y, mask, SpadeParams(max_iters=40)).samples
    assert a.tobytes() == b.tobytes()


def test_non_convergence_is_reported_not_raised():
    x = three_sines(5, 3000)
    y, mask = clip(x, 0.3 * np.max(np.abs(x)))
    out, rep = declip_aspade(y, mask, SpadeParams(max_iters=2, tol=1e-12), return_report=True)
    assert rep.n_converged == 0 and not rep.all_converged
    assert np.all(np.isfinite(out.samples))


def test_bounds_follow_stored_labels():
    y = np.array([0.5, 0.5, -0.5, 0.1])
    # label says high even though the sign test would agree; the low one is trusted too
    mask = ClipMask([1, 0, 2, 0], 0.5)
    lo, hi = constraint_bounds(y, mask)
    assert lo.tolist() == [0.5, 0.5, -np.inf, 0.1]
    assert hi.tolist() == [np.inf, 0.5, -0.5, 0.1]
    assert project(np.array([0.2, 0.9, 0.0, 3.0]), y, mask).tolist() == [0.5, 0.5, -0.5, 0.1]


@pytest.mark.parametrize("kwargs", [dict(frame_len=0), dict(hop=2048), dict(tol=0.0), dict(max_iters=0)])
def test_invalid_params(kwargs):
    with pytest.raises(ValueError):
        SpadeParams(**kwargs)


def test_mask_length_and_consistency_checked():
    y = np.array([0.5, -0.5, 0.2])
    with pytest.raises(ValueError, match="length"):
        declip_aspade(y, ClipMask([0, 0]))
    with pytest.raises(ValueError, match="inconsistent"):
        declip_aspade(y, ClipMask([1, 0, 1], 0.5))


def frame_problem(seed=0):
    x = three_sines(seed, 512) * np.hanning(512)
    theta = 0.4 * np.max(np.abs(x))
    y, mask = clip(x, theta)
    lo, hi = constraint_bounds(y.samples, mask)
    return y.samples, lo, hi


@pytest.mark.skipif(_kernels.BACKEND != "cython", reason="compiled kernels not built")
def test_backends_agree_on_frame_solver():
    from declip._kernels import _ckernels

    y, lo, hi = frame_problem()
    a = _pykernels.aspade_frame(y, lo, hi, 1024, 1, 1, 80, 1e-3)
    b = _ckernels.aspade_frame(y, lo, hi, 1024, 1, 1, 80, 1e-3)
    assert a[1] == b[1] and a[4] == b[4]
    np.testing.assert_allclose(a[0], b[0], atol=1e-9)
    assert abs(a[3] - b[3]) < 1e-9


@pytest.mark.skipif(_kernels.BACKEND != "cython", reason="compiled kernels not built")
def test_backends_agree_on_overlap_add(rng):
    from declip._kernels import _ckernels

    frames = rng.standard_normal((7, 64))
    np.testing.assert_allclose(_pykernels.overlap_add(frames, 16, 160),
                               _ckernels.overlap_add(frames[None], 16, 160)[0], atol=1e-13)
