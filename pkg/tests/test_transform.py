import numpy as np
import pytest

import declip.autodiff as ad
from declip.autodiff import Tensor
from declip.autodiff.gradcheck import max_rel_error
from declip.errors import NumericalError
from declip.transform import (
    ComplexSpectrogram,
    StftConfig,
    istft,
    istft_array,
    istft_tensor,
    stft,
    stft_array,
    stft_tensor,
)

CONFIGS = [StftConfig(512, hop=128), StftConfig(128, hop=32), StftConfig(256, win_length=128, hop=64)]


def test_default_shape():
    spec = stft(np.zeros(16000), StftConfig(512, 512, 128))
    assert spec.shape == (2, 257, 126)


def test_toy_shape():
    assert stft(np.zeros(16000), StftConfig(128, hop=32)).shape == (2, 65, 501)


def test_bin_centred_sine_peaks_at_its_bin():
    cfg = StftConfig(512, hop=128)
    k = 37
    n = np.arange(8000)
    x = np.cos(2 * np.pi * k * n / 512)
    mag = stft(x, cfg).magnitude
    interior = mag[:, 4:-4]
    assert np.all(np.argmax(interior, axis=0) == k)


def time_domain_energy(x, cfg):
    """Oracle: fft * sum_n xpad[n]^2 * (sum of squared windows covering n)."""
    xp = np.pad(x, cfg.pad, mode="reflect")
    w2 = cfg.window_array() ** 2
    env = np.zeros(xp.size)
    for t in range(cfg.n_frames(x.size)):
        env[t * cfg.hop:t * cfg.hop + cfg.fft_size] += w2
    return cfg.fft_size * float(np.sum(xp**2 * env))


@pytest.mark.parametrize("cfg", CONFIGS)
def test_parseval(cfg, rng):
    x = rng.standard_normal(5000)
    spec = stft(x, cfg).data
    power = spec[0] ** 2 + spec[1] ** 2
    weights = np.full(cfg.n_bins, 2.0)
    weights[0] = weights[-1] = 1.0
    total = float(np.sum(power * weights[:, None]))
    assert abs(total - time_domain_energy(x, cfg)) <= 1e-6 * total


@pytest.mark.parametrize("cfg", CONFIGS)
def test_round_trip(cfg, rng):
    for n in (1000, 4096, 4097):
        x = rng.standard_normal(n)
        back = istft(stft(x, cfg), n).samples
        assert np.max(np.abs(back - x)) < 1e-10


def test_zero_spectrogram_gives_zero_signal():
    cfg = StftConfig(128, hop=32)
    out = istft(ComplexSpectrogram(np.zeros((2, 65, 32)), cfg), 31 * 32)
    assert not np.any(out.samples)


def test_istft_linearity(rng):
    cfg = StftConfig(128, hop=32)
    s1, s2 = rng.standard_normal((2, 2, 65, 40))
    a, b = 0.7, -1.3
    lhs = istft_array(a * s1 + b * s2, cfg, 39 * 32)
    rhs = a * istft_array(s1, cfg, 39 * 32) + b * istft_array(s2, cfg, 39 * 32)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_stft_linearity(rng):
    cfg = StftConfig(128, hop=32)
    x1, x2 = rng.standard_normal((2, 900))
    lhs = stft_array(2 * x1 - 3 * x2, cfg)
    rhs = 2 * stft_array(x1, cfg) - 3 * stft_array(x2, cfg)
    assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_real_output_of_synthesis(rng):
    cfg = StftConfig(128, hop=32)
    out = istft_array(rng.standard_normal((2, 65, 11)), cfg, 320)
    assert out.dtype == np.float64


@pytest.mark.parametrize(
    "kwargs",
    [dict(fft_size=500), dict(fft_size=128, hop=200), dict(fft_size=128, win_length=256), dict(fft_size=128, hop=128), dict(fft_size=128, hop=48)],
)
def test_invalid_configs(kwargs):
    with pytest.raises(ValueError):
        StftConfig(**kwargs)


def test_zero_normalisation_detected():
    cfg = StftConfig(128, hop=48, require_cola=False, center_pad=False)
    # hann starts at 0, so the very first sample has no synthesis weight
    with pytest.raises(NumericalError):
        istft_array(np.zeros((2, 65, 3)), cfg, 128 + 2 * 48)


def test_frame_count_mismatch_rejected():
    with pytest.raises(ValueError):
        istft_array(np.zeros((2, 65, 10)), StftConfig(128, hop=32), 1000)


def test_tensor_paths_match_numpy(rng):
    cfg = StftConfig(128, hop=32)
    x = rng.standard_normal((2, 777))
    re, im = stft_tensor(Tensor(x), cfg)
    ref = stft_array(x, cfg)
    np.testing.assert_allclose(np.swapaxes(re.data, -1, -2), ref[:, 0], atol=1e-12)
    np.testing.assert_allclose(np.swapaxes(im.data, -1, -2), ref[:, 1], atol=1e-12)
    back = istft_tensor(Tensor(ref), cfg, 777)
    np.testing.assert_allclose(back.data, x, atol=1e-10)


def test_short_signal_reflect(rng):
    cfg = StftConfig(128, hop=32)
    x = rng.standard_normal(40)  # shorter than the pad
    re, _ = stft_tensor(Tensor(x[None]), cfg)
    np.testing.assert_allclose(np.swapaxes(re.data[0], 0, 1), stft_array(x, cfg)[0], atol=1e-12)
    p = Tensor(x[None].copy(), requires_grad=True)
    w = np.random.default_rng(0).standard_normal(re.shape)
    err = max_rel_error(lambda: ad.ops.sum(ad.mul(stft_tensor(p, cfg)[0], Tensor(w))), [p])
    assert err < 1e-4


def test_tensor_stft_istft_gradients(rng):
    cfg = StftConfig(32, hop=8)
    x = Tensor(rng.standard_normal((1, 60)), requires_grad=True)
    s = Tensor(rng.standard_normal((1, 2, 17, 8)), requires_grad=True)
    w1 = rng.standard_normal((1, 8, 17))
    w2 = rng.standard_normal((1, 56))
    assert max_rel_error(lambda: ad.ops.sum(ad.mul(stft_tensor(x, cfg)[1], Tensor(w1))), [x]) < 1e-4
    assert max_rel_error(lambda: ad.ops.sum(ad.mul(istft_tensor(s, cfg, 56), Tensor(w2))), [s]) < 1e-4
