import numpy as np
import pytest

import declip.autodiff as ad
from declip.autodiff import Tensor
from declip.autodiff.gradcheck import max_rel_error

TOL = 1e-4


def param(rng, *shape, scale=1.0):
    return Tensor(rng.standard_normal(shape) * scale, requires_grad=True)


def weighted(out: Tensor, rng) -> Tensor:
    # random projection so every output entry matters to the scalar
    w = Tensor(rng.standard_normal(out.shape))
    return ad.ops.sum(ad.mul(out, w))


def check(build, params, **kw):
    err = max_rel_error(build, params, **kw)
    assert err < TOL, err


def test_conv1d_hand_example():
    x = Tensor(np.arange(1, 9, dtype=float).reshape(1, 1, 8))
    k = Tensor(np.array([1.0, 0.0, -1.0]).reshape(1, 1, 3))
    out = ad.conv1d(x, k)
    np.testing.assert_array_equal(out.data.ravel(), [-2.0] * 6)


def test_softmax_uniform():
    out = ad.softmax(Tensor([0.0, 0.0, 0.0]), axis=0)
    np.testing.assert_allclose(out.data, [1 / 3] * 3, rtol=0, atol=1e-15)


def test_grad_of_dot_is_x():
    x = np.array([1.5, -2.0, 0.25])
    w = Tensor(np.zeros(3), requires_grad=True)
    ad.ops.sum(ad.mul(w, Tensor(x))).backward()
    np.testing.assert_array_equal(w.grad, x)


def test_grad_of_squared_norm():
    w = Tensor(np.array([0.5, -1.0, 3.0]), requires_grad=True)
    ad.sum_squares(w).backward()
    np.testing.assert_allclose(w.grad, 2 * w.data)


def test_backward_accumulates():
    w = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    ad.sum_squares(w).backward()
    ad.sum_squares(w).backward()
    np.testing.assert_allclose(w.grad, 4 * w.data)


def test_backward_rejects_non_scalar():
    w = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ValueError):
        ad.mul(w, 2.0).backward()


def test_shape_mismatch_names_both_shapes():
    with pytest.raises(ValueError, match=r"\(2, 3\).*\(3, 2\)"):
        ad.add(Tensor(np.ones((2, 3))), Tensor(np.ones((3, 2))))


def test_no_grad_records_nothing():
    w = Tensor(np.ones(3), requires_grad=True)
    with ad.no_grad():
        out = ad.mul(w, w)
    assert not out.requires_grad and out.is_leaf and out.grad is None


def test_forward_is_deterministic():
    rng = np.random.default_rng(3)
    x = Tensor(rng.standard_normal((2, 4, 6, 5)))
    w = Tensor(rng.standard_normal((4, 2, 3, 3)))
    a = ad.conv2d(x, w, padding=1, groups=2).data
    b = ad.conv2d(x, w, padding=1, groups=2).data
    assert a.tobytes() == b.tobytes()


# ---- finite-difference checks, one per op -----------------------------------

@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def test_grad_elementwise(rng):
    a, b = param(rng, 3, 4), param(rng, 3, 4)
    pos = Tensor(rng.uniform(0.5, 2.0, (3, 4)), requires_grad=True)
    proj = np.random.default_rng(9)
    wts = [Tensor(proj.standard_normal((3, 4))) for _ in range(8)]

    def f():
        terms = [
            ad.add(a, b), ad.sub(a, b), ad.mul(a, b), ad.div(a, pos),
            ad.sqrt(pos), ad.log(pos), ad.exp(a), ad.mul(a, 2.5),
        ]
        total = Tensor(0.0)
        for t, w in zip(terms, wts):
            total = ad.add(total, ad.ops.sum(ad.mul(t, w)))
        return total

    check(f, [a, b, pos])


def test_grad_activations(rng):
    # keep entries away from the kink at 0
    x = Tensor(rng.choice([-1, 1], (4, 3, 5)) * rng.uniform(0.1, 1.0, (4, 3, 5)), requires_grad=True)
    alpha = Tensor(rng.uniform(0.05, 0.4, 3), requires_grad=True)
    check(lambda: weighted(ad.leaky_relu(x, 0.01), np.random.default_rng(2)), [x])
    check(lambda: weighted(ad.prelu(x, alpha, axis=1), np.random.default_rng(2)), [x, alpha])
    check(lambda: weighted(ad.clamp_min(x, 0.05 + 0.0), np.random.default_rng(2)), [x])


def test_grad_reductions(rng):
    x = Tensor(rng.choice([-1, 1], (3, 4)) * rng.uniform(0.1, 1.0, (3, 4)), requires_grad=True)
    check(lambda: ad.abs_sum(x), [x])
    check(lambda: ad.sum_squares(x), [x])
    check(lambda: weighted(ad.mean(x, axis=1), np.random.default_rng(3)), [x])
    check(lambda: ad.mean(ad.absolute(x)), [x])


def test_grad_shape_ops(rng):
    a, b = param(rng, 2, 3, 4), param(rng, 2, 5, 4)
    bias = param(rng, 4)
    check(lambda: weighted(ad.concat([a, b], axis=1), np.random.default_rng(4)), [a, b])
    check(lambda: weighted(a[:, 1:, ::2], np.random.default_rng(5)), [a])
    check(lambda: weighted(ad.reshape(a, (6, 4)), np.random.default_rng(6)), [a])
    check(lambda: weighted(ad.transpose(a, (2, 0, 1)), np.random.default_rng(7)), [a])
    check(lambda: weighted(ad.expand(bias, (2, 3, 4)), np.random.default_rng(8)), [bias])


def test_grad_matmul(rng):
    a, b, w = param(rng, 2, 3, 4), param(rng, 2, 4, 5), param(rng, 4, 6)
    check(lambda: weighted(ad.matmul(a, b), np.random.default_rng(1)), [a, b])
    check(lambda: weighted(ad.matmul(a, w), np.random.default_rng(1)), [a, w])


def test_grad_softmax_and_norm(rng):
    x = param(rng, 3, 5, 6)
    check(lambda: weighted(ad.softmax(x, axis=-1), np.random.default_rng(1)), [x])
    check(lambda: weighted(ad.softmax(x, axis=1), np.random.default_rng(1)), [x])
    check(lambda: weighted(ad.layer_stats_norm(x, axes=-1), np.random.default_rng(1)), [x])
    check(lambda: weighted(ad.layer_stats_norm(x, axes=(1, 2)), np.random.default_rng(1)), [x])


@pytest.mark.parametrize("stride,padding,groups", [(1, 0, 1), (1, 1, 1), (2, 1, 1), (1, 1, 2), ((2, 1), (0, 2), 2)])
def test_grad_conv2d(rng, stride, padding, groups):
    x = param(rng, 2, 4, 7, 6)
    w = param(rng, 6, 4 // groups, 3, 3, scale=0.5)
    b = param(rng, 6)
    check(lambda: weighted(ad.conv2d(x, w, b, stride=stride, padding=padding, groups=groups), np.random.default_rng(1)), [x, w, b])


@pytest.mark.parametrize("stride,padding", [(1, 0), (1, 1), (2, 1), (3, 0)])
def test_grad_conv1d(rng, stride, padding):
    x = param(rng, 2, 3, 17)
    w = param(rng, 5, 3, 4, scale=0.5)
    b = param(rng, 5)
    check(lambda: weighted(ad.conv1d(x, w, b, stride=stride, padding=padding), np.random.default_rng(1)), [x, w, b])


@pytest.mark.parametrize("stride,padding", [(1, 1), (2, 0), (2, 1)])
def test_grad_conv_transpose2d(rng, stride, padding):
    x = param(rng, 2, 4, 5, 4)
    w = param(rng, 4, 3, 3, 3, scale=0.5)
    b = param(rng, 3)
    check(lambda: weighted(ad.conv_transpose2d(x, w, b, stride=stride, padding=padding), np.random.default_rng(1)), [x, w, b])


def test_conv_transpose_is_adjoint_of_conv(rng):
    x = rng.standard_normal((2, 3, 7, 7))
    y = rng.standard_normal((2, 5, 4, 4))
    w = rng.standard_normal((5, 3, 3, 3))
    cx = ad.conv2d(Tensor(x), Tensor(w), stride=2, padding=1).data
    ty = ad.conv_transpose2d(Tensor(y), Tensor(w), stride=2, padding=1).data
    assert cx.shape == y.shape
    np.testing.assert_allclose(np.sum(cx * y), np.sum(x * ty), rtol=1e-12)


def test_grad_spectral_ops(rng):
    x = param(rng, 2, 12)
    re, im = param(rng, 2, 9), param(rng, 2, 9)
    spec = param(rng, 2, 3, 4)
    check(lambda: weighted(ad.rfft(x, 16)[0], np.random.default_rng(1)) + weighted(ad.rfft(x, 16)[1], np.random.default_rng(2)), [x])
    check(lambda: weighted(ad.rfft(x, 8)[1], np.random.default_rng(3)), [x])
    check(lambda: weighted(ad.irfft(re, im, 16), np.random.default_rng(4)), [re, im])
    check(lambda: weighted(ad.complex_magnitude(spec, axis=0), np.random.default_rng(5)), [spec])


def test_rfft_matches_numpy(rng):
    x = rng.standard_normal((3, 20))
    re, im = ad.rfft(Tensor(x), 32)
    ref = np.fft.rfft(x, 32)
    np.testing.assert_allclose(re.data, ref.real, atol=1e-12)
    np.testing.assert_allclose(im.data, ref.imag, atol=1e-12)


def test_grad_framing_ops(rng):
    x = param(rng, 2, 23)
    frames = param(rng, 2, 5, 8)
    check(lambda: weighted(ad.pad_reflect(x, 4), np.random.default_rng(1)), [x])
    check(lambda: weighted(ad.frame(x, 8, 3), np.random.default_rng(2)), [x])
    check(lambda: weighted(ad.overlap_add(frames, 3, 20), np.random.default_rng(3)), [frames])
    check(lambda: weighted(ad.overlap_add(frames, 5, 40), np.random.default_rng(3)), [frames])


def test_frame_and_overlap_add_are_adjoint(rng):
    x = rng.standard_normal(50)
    f = rng.standard_normal((13, 12))
    lhs = np.sum(ad.frame(Tensor(x), 12, 3).data * f)
    rhs = np.sum(x * ad.overlap_add(Tensor(f), 3, 50).data)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12)


def test_serialize_round_trip(tmp_path, rng):
    arr = rng.standard_normal((3, 1, 4))
    path = tmp_path / "t.bin"
    with open(path, "wb") as fh:
        ad.dump_tensor(arr, fh)
    raw = path.read_bytes()
    assert raw[:4] == b"DTEN" and int.from_bytes(raw[4:8], "little") == 3
    with open(path, "rb") as fh:
        back = ad.load_tensor(fh)
    assert back.tobytes() == arr.tobytes()


def test_grad_fused_attention(rng):
    q, k, v = param(rng, 2, 3, 5, 4), param(rng, 2, 3, 5, 4), param(rng, 2, 3, 5, 4)
    check(lambda: weighted(ad.attention(q, k, v, 0.5)[0], np.random.default_rng(1)), [q, k, v])


def test_fused_attention_matches_composed_ops(rng):
    q, k, v = (Tensor(rng.standard_normal((3, 6, 4))) for _ in range(3))
    out, weights = ad.attention(q, k, v, 0.5)
    scores = ad.mul(ad.matmul(q, ad.transpose(k, (0, 2, 1))), 0.5)
    ref = ad.matmul(ad.softmax(scores, axis=-1), v)
    np.testing.assert_allclose(out.data, ref.data, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(weights.sum(axis=-1), 1.0, atol=1e-12)
