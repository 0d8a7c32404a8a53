import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from declip.errors import UnreachableTargetError
from declip.metrics import sdr
from declip.signal import ClipMask, Label, Waveform, clip, find_threshold, mask_from_clipped

from conftest import direct_sdr, sine

R, H, L = Label.RELIABLE, Label.CLIPPED_HIGH, Label.CLIPPED_LOW


def test_clip_example():
    y, mask = clip(Waveform([0.5, -0.2, 0.9]), 0.6)
    np.testing.assert_array_equal(y.samples, [0.5, -0.2, 0.6])
    np.testing.assert_array_equal(mask.labels, [R, R, H])
    assert mask.theta == 0.6


def test_clip_equality_is_reliable_and_zero_never_clips():
    y, mask = clip([0.6, -0.6, 0.0, -0.7], 0.6)
    np.testing.assert_array_equal(mask.labels, [R, R, R, L])
    np.testing.assert_array_equal(y.samples, [0.6, -0.6, 0.0, -0.6])


def test_clip_above_peak_is_identity():
    x = sine(amp=0.8)
    y, mask = clip(x, 0.8)
    assert y.samples.tobytes() == x.tobytes()
    assert mask.n_clipped == 0


@pytest.mark.parametrize("theta", [0.0, -0.1, float("nan")])
def test_clip_rejects_bad_theta(theta):
    with pytest.raises(ValueError):
        clip([0.1, 0.2], theta)


def test_clip_rejects_nan_input():
    with pytest.raises(ValueError):
        clip([0.1, float("nan")], 0.5)


def test_waveform_invariants():
    with pytest.raises(ValueError):
        Waveform([])
    with pytest.raises(ValueError):
        Waveform([0.0, float("inf")])
    with pytest.raises(ValueError):
        Waveform([0.0], sample_rate=0)


def test_find_threshold_hits_7db_on_unit_sine():
    x = sine()
    theta = find_threshold(x, 7.0)
    y, _ = clip(x, theta)
    assert abs(direct_sdr(x, y.samples) - 7.0) <= 0.01


def test_find_threshold_3db_remeasured():
    x = sine()
    theta = find_threshold(x, 3.0)
    y = np.clip(x, -theta, theta)  # independent clipping path
    assert abs(direct_sdr(x, y) - 3.0) <= 0.01


def test_find_threshold_inf_returns_peak():
    x = sine(amp=0.7)
    theta = find_threshold(x, math.inf)
    y, _ = clip(x, theta)
    assert y.samples.tobytes() == x.tobytes()
    assert sdr(x, y) == math.inf


def test_find_threshold_monotone(rng):
    for _ in range(5):
        x = rng.standard_normal(4000)
        assert find_threshold(x, 15.0) > find_threshold(x, 1.0)


@pytest.mark.parametrize("target", [0.0, -3.0, -math.inf])
def test_find_threshold_unreachable(target):
    with pytest.raises(UnreachableTargetError, match="achievable range"):
        find_threshold(sine(), target)


def test_find_threshold_rejects_silence():
    with pytest.raises(ValueError):
        find_threshold(np.zeros(100), 3.0)


def test_mask_from_clipped_matches_clip_mask(rng):
    x = rng.uniform(-1, 1, 5000)
    y, mask = clip(x, 0.4)
    inferred = mask_from_clipped(y, 0.4, eps=0.0)
    # exact ties |x| == theta are vanishingly unlikely for uniform draws
    assert not np.any(np.abs(x) == 0.4)
    np.testing.assert_array_equal(inferred.labels, mask.labels)


def test_mask_from_clipped_all_zero():
    assert mask_from_clipped(np.zeros(10), 0.3).n_clipped == 0


def test_mask_from_clipped_eps_disagreement_region(rng):
    theta, eps = 0.5, 0.05
    for _ in range(10):
        x = rng.uniform(-1, 1, 2000)
        y, mask = clip(x, theta)
        inferred = mask_from_clipped(y, theta, eps)
        differ = inferred.labels != mask.labels
        band = (np.abs(x) >= theta - eps) & (np.abs(x) <= theta)
        # exhaustive per-sample comparison: disagreements are exactly the eps band
        np.testing.assert_array_equal(differ, band)


finite = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False, allow_infinity=False)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 200), elements=finite), st.floats(1e-3, 2.5))
def test_clip_invariants(x, theta):
    y, mask = clip(x, theta)
    ys = y.samples
    # idempotence, bound, reliability, sign preservation
    assert clip(ys, theta)[0].samples.tobytes() == ys.tobytes()
    assert np.all(np.abs(ys) <= theta)
    rel = mask.reliable
    assert np.array_equal(ys[rel], x[rel])
    nz = x != 0
    assert np.array_equal(np.sign(ys[nz]), np.sign(x[nz]))
    assert np.all(ys[mask.high] == theta) and np.all(ys[mask.low] == -theta)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.integers(2, 100), elements=finite), st.floats(1e-3, 1.0), st.floats(1e-3, 1.0))
def test_sdr_monotone_in_theta(x, t1, t2):
    if not np.any(x):
        return
    lo, hi = sorted((t1, t2))
    assert direct_sdr(x, clip(x, lo)[0].samples) <= direct_sdr(x, clip(x, hi)[0].samples) + 1e-9


def test_clip_mask_type_checks():
    with pytest.raises(ValueError):
        ClipMask([0, 3])
