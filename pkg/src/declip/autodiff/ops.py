"""Differentiable operations.

Every op validates shapes up front and raises ``ValueError`` naming the
offending shapes.  Broadcasting is limited to Python scalars; use
:func:`expand` to broadcast a tensor explicitly.
"""
from __future__ import annotations

from numbers import Number
from typing import Sequence

import numpy as np

from .. import _kernels
from .tensor import Tensor, as_tensor, make_result


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def _sum_to(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a gradient produced under broadcasting back to ``shape``."""
    if g.shape == shape:
        return g
    lead = g.ndim - len(shape)
    g = g.sum(axis=tuple(range(lead))) if lead else g
    axes = tuple(i for i, (gs, s) in enumerate(zip(g.shape, shape)) if s == 1 and gs != 1)
    return g.sum(axis=axes, keepdims=True) if axes else g


# ---------------------------------------------------------------- elementwise

def add(a, b) -> Tensor:
    if isinstance(b, Number):
        a = as_tensor(a)
        return make_result(a.data + b, (a,), lambda g: (g,), "add_scalar")
    if isinstance(a, Number):
        return add(b, a)
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("add", a, b)
    return make_result(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a, b) -> Tensor:
    if isinstance(b, Number):
        return add(a, -b)
    if isinstance(a, Number):
        return add(mul(b, -1.0), a)
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("sub", a, b)
    return make_result(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a, b) -> Tensor:
    if isinstance(b, Number):
        a = as_tensor(a)
        s = float(b)
        return make_result(a.data * s, (a,), lambda g: (g * s,), "scale")
    if isinstance(a, Number):
        return mul(b, a)
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("mul", a, b)
    ad, bd = a.data, b.data
    return make_result(ad * bd, (a, b), lambda g: (g * bd, g * ad), "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("div", a, b)
    ad, bd = a.data, b.data
    out = ad / bd

    def back(g):
        gb = g / bd
        return gb, -gb * out

    return make_result(out, (a, b), back, "div")


def expand(x: Tensor, shape: Sequence[int]) -> Tensor:
    """Broadcast ``x`` to ``shape`` (numpy rules); the result is a read-only view."""
    x = as_tensor(x)
    shape = tuple(int(s) for s in shape)
    try:
        out = np.broadcast_to(x.data, shape)
    except ValueError:
        raise ValueError(f"expand: cannot broadcast {x.shape} to {shape}") from None
    src = x.shape
    return make_result(out, (x,), lambda g: (_sum_to(g, src),), "expand")


def leaky_relu(x: Tensor, slope: float = 0.01) -> Tensor:
    x = as_tensor(x)
    pos = x.data > 0
    out = np.where(pos, x.data, slope * x.data)
    return make_result(out, (x,), lambda g: (np.where(pos, g, slope * g),), "leaky_relu")


def prelu(x: Tensor, alpha: Tensor, axis: int = 1) -> Tensor:
    """Leaky ReLU with a learnable slope per index of ``axis``."""
    x, alpha = as_tensor(x), as_tensor(alpha)
    axis = axis % x.ndim
    if alpha.ndim != 1 or alpha.shape[0] != x.shape[axis]:
        raise ValueError(f"prelu: slope shape {alpha.shape} does not match axis {axis} of {x.shape}")
    bshape = [1] * x.ndim
    bshape[axis] = -1
    a = alpha.data.reshape(bshape)
    pos = x.data > 0
    out = np.where(pos, x.data, a * x.data)
    reduce_axes = tuple(i for i in range(x.ndim) if i != axis)

    def back(g):
        gx = np.where(pos, g, a * g)
        ga = np.where(pos, 0.0, g * x.data).sum(axis=reduce_axes)
        return gx, ga

    return make_result(out, (x, alpha), back, "prelu")


def sqrt(x: Tensor) -> Tensor:
    x = as_tensor(x)
    out = np.sqrt(x.data)

    def back(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            gx = np.where(out > 0, g / (2.0 * out), 0.0)
        return (gx,)

    return make_result(out, (x,), back, "sqrt")


def log(x: Tensor) -> Tensor:
    x = as_tensor(x)
    xd = x.data
    return make_result(np.log(xd), (x,), lambda g: (g / xd,), "log")


def exp(x: Tensor) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.data)
    return make_result(out, (x,), lambda g: (g * out,), "exp")


def clamp_min(x: Tensor, floor: float) -> Tensor:
    """max(x, floor); the gradient is zero where the floor is active."""
    x = as_tensor(x)
    keep = x.data >= floor
    out = np.where(keep, x.data, floor)
    return make_result(out, (x,), lambda g: (np.where(keep, g, 0.0),), "clamp_min")


def absolute(x: Tensor) -> Tensor:
    x = as_tensor(x)
    s = np.sign(x.data)
    return make_result(np.abs(x.data), (x,), lambda g: (g * s,), "abs")


# ---------------------------------------------------------------- reductions

def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    out = np.sum(x.data, axis=axis, keepdims=keepdims)
    shape = x.shape

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape),)

    return make_result(np.asarray(out), (x,), back, "sum")


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    if axis is None:
        count = x.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        count = int(np.prod([x.shape[a] for a in axes]))
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


def abs_sum(x: Tensor) -> Tensor:
    """Sum of absolute values (the L1 norm); subgradient 0 at 0."""
    x = as_tensor(x)
    s = np.sign(x.data)
    return make_result(np.asarray(np.abs(x.data).sum()), (x,), lambda g: (g * s,), "abs_sum")


def sum_squares(x: Tensor) -> Tensor:
    x = as_tensor(x)
    xd = x.data
    return make_result(np.asarray(np.sum(xd * xd)), (x,), lambda g: (2.0 * g * xd,), "sum_squares")


# ---------------------------------------------------------------- shape ops

def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    src = x.shape
    try:
        out = x.data.reshape(tuple(shape))
    except ValueError:
        raise ValueError(f"reshape: cannot reshape {src} to {tuple(shape)}") from None
    return make_result(out, (x,), lambda g: (g.reshape(src),), "reshape")


def transpose(x: Tensor, axes: Sequence[int] | None = None) -> Tensor:
    x = as_tensor(x)
    axes = tuple(range(x.ndim))[::-1] if not axes else tuple(axes)
    if sorted(axes) != list(range(x.ndim)):
        raise ValueError(f"transpose: axes {axes} invalid for shape {x.shape}")
    inv = tuple(np.argsort(axes))
    return make_result(x.data.transpose(axes), (x,), lambda g: (g.transpose(inv),), "transpose")


def concat(xs: Sequence[Tensor], axis: int = 0) -> Tensor:
    xs = [as_tensor(t) for t in xs]
    if not xs:
        raise ValueError("concat: empty input list")
    ref = xs[0].shape
    ax = axis % len(ref)
    for t in xs[1:]:
        if t.ndim != len(ref) or any(a != b for i, (a, b) in enumerate(zip(t.shape, ref)) if i != ax):
            raise ValueError(f"concat: shape mismatch {ref} vs {t.shape} along axis {axis}")
    sizes = [t.shape[ax] for t in xs]
    bounds = np.cumsum([0] + sizes)

    def back(g):
        return tuple(np.take(g, range(lo, hi), axis=ax) for lo, hi in zip(bounds[:-1], bounds[1:]))

    return make_result(np.concatenate([t.data for t in xs], axis=ax), xs, back, "concat")


def slice(x: Tensor, index) -> Tensor:  # noqa: A001
    """Basic (view) indexing: ints, slices, Ellipsis, None."""
    x = as_tensor(x)
    out = x.data[index]
    src = x.shape

    def back(g):
        full = np.zeros(src)
        full[index] = g
        return (full,)

    return make_result(np.array(out), (x,), back, "slice")


# ---------------------------------------------------------------- linear algebra

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """``a @ b`` with equal batch dims, or a 2-D ``b`` shared across a's batch."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul: shape mismatch {a.shape} @ {b.shape}")
    if b.ndim != 2 and a.shape[:-2] != b.shape[:-2]:
        raise ValueError(f"matmul: batch dims differ {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    out = np.matmul(ad, bd)

    def back(g):
        ga = np.matmul(g, np.swapaxes(bd, -1, -2))
        if bd.ndim == 2:
            gb = ad.reshape(-1, ad.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        else:
            gb = np.matmul(np.swapaxes(ad, -1, -2), g)
        return ga, gb

    return make_result(out, (a, b), back, "matmul")


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return make_result(out, (x,), back, "softmax")


def attention(q: Tensor, k: Tensor, v: Tensor, scale: float) -> tuple[Tensor, np.ndarray]:
    """Fused ``softmax(scale * q k^T) v`` over ``(..., L, d)`` inputs.

    Only the attention weights are kept for the backward pass. Returns the
    output tensor and the (read-only) weights.
    """
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    if q.shape != k.shape or q.shape != v.shape or q.ndim < 2:
        raise ValueError(f"attention: q/k/v shapes differ {q.shape}, {k.shape}, {v.shape}")
    qd, kd, vd = q.data, k.data, v.data
    w = np.matmul(qd, np.swapaxes(kd, -1, -2))
    w *= scale
    w -= w.max(axis=-1, keepdims=True)
    np.exp(w, out=w)
    w /= w.sum(axis=-1, keepdims=True)
    out = np.matmul(w, vd)

    def back(g):
        gv = np.matmul(np.swapaxes(w, -1, -2), g)
        gs = np.matmul(g, np.swapaxes(vd, -1, -2))
        gs -= (gs * w).sum(axis=-1, keepdims=True)
        gs *= w
        gs *= scale
        return np.matmul(gs, kd), np.matmul(np.swapaxes(gs, -1, -2), qd), gv

    weights = w.view()
    weights.setflags(write=False)
    return make_result(out, (q, k, v), back, "attention"), weights


def layer_stats_norm(x: Tensor, axes=-1, eps: float = 1e-5) -> Tensor:
    """(x - mean) / sqrt(var + eps) with statistics over ``axes``; no affine part."""
    x = as_tensor(x)
    axes = (axes,) if isinstance(axes, int) else tuple(axes)
    mu = x.data.mean(axis=axes, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=axes, keepdims=True) + eps)
    out = xc * inv

    def back(g):
        gm = g.mean(axis=axes, keepdims=True)
        gxm = (g * out).mean(axis=axes, keepdims=True)
        return (inv * (g - gm - out * gxm),)

    return make_result(out, (x,), back, "layer_stats_norm")


# ---------------------------------------------------------------- convolutions

def _pair(v) -> tuple[int, int]:
    return (int(v), int(v)) if isinstance(v, (int, np.integer)) else (int(v[0]), int(v[1]))


def _conv_out(n: int, k: int, s: int, p: int) -> int:
    return (n + 2 * p - k) // s + 1


def _conv2d_fwd(x, w, stride, padding, groups):
    b, cin, h, wd = x.shape
    cout, cin_g, kh, kw = w.shape
    (sh, sw), (ph, pw) = stride, padding
    ho, wo = _conv_out(h, kh, sh, ph), _conv_out(wd, kw, sw, pw)
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if ph or pw else x
    out = np.zeros((b, cout, ho * wo))
    cout_g = cout // groups
    for gi in range(groups):
        xs = xp[:, gi * cin_g:(gi + 1) * cin_g]
        wg = w[gi * cout_g:(gi + 1) * cout_g]
        acc = out[:, gi * cout_g:(gi + 1) * cout_g]
        for i in range(kh):
            for j in range(kw):
                patch = xs[:, :, i:i + sh * (ho - 1) + 1:sh, j:j + sw * (wo - 1) + 1:sw]
                acc += np.matmul(wg[:, :, i, j], patch.reshape(b, cin_g, ho * wo))
    return out.reshape(b, cout, ho, wo)


def _conv2d_grad_input(g, w, in_shape, stride, padding, groups):
    b, cin, h, wd = in_shape
    cout, cin_g, kh, kw = w.shape
    (sh, sw), (ph, pw) = stride, padding
    ho, wo = g.shape[2], g.shape[3]
    gx = np.zeros((b, cin, h + 2 * ph, wd + 2 * pw))
    gflat = g.reshape(b, cout, ho * wo)
    cout_g = cout // groups
    for gi in range(groups):
        gg = gflat[:, gi * cout_g:(gi + 1) * cout_g]
        wg = w[gi * cout_g:(gi + 1) * cout_g]
        dst = gx[:, gi * cin_g:(gi + 1) * cin_g]
        for i in range(kh):
            for j in range(kw):
                contrib = np.matmul(wg[:, :, i, j].T, gg).reshape(b, cin_g, ho, wo)
                dst[:, :, i:i + sh * (ho - 1) + 1:sh, j:j + sw * (wo - 1) + 1:sw] += contrib
    return gx[:, :, ph:ph + h, pw:pw + wd]


def _conv2d_grad_weight(g, x, w_shape, stride, padding, groups):
    b = x.shape[0]
    cout, cin_g, kh, kw = w_shape
    (sh, sw), (ph, pw) = stride, padding
    ho, wo = g.shape[2], g.shape[3]
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if ph or pw else x
    gw = np.zeros(w_shape)
    cout_g = cout // groups
    gflat = g.reshape(b, cout, ho * wo)
    for gi in range(groups):
        gg = gflat[:, gi * cout_g:(gi + 1) * cout_g]
        # (b, cout_g, L) -> (cout_g, b*L)
        g2 = gg.transpose(1, 0, 2).reshape(cout_g, -1)
        xs = xp[:, gi * cin_g:(gi + 1) * cin_g]
        for i in range(kh):
            for j in range(kw):
                patch = xs[:, :, i:i + sh * (ho - 1) + 1:sh, j:j + sw * (wo - 1) + 1:sw]
                p2 = patch.reshape(b, cin_g, ho * wo).transpose(1, 0, 2).reshape(cin_g, -1)
                gw[gi * cout_g:(gi + 1) * cout_g, :, i, j] = g2 @ p2.T
    return gw


def _check_conv(op, x, w, groups, in_ch_axis_size):
    if x.ndim != 4 or w.ndim != 4:
        raise ValueError(f"{op}: expected 4-D input and weight, got {x.shape} and {w.shape}")
    if in_ch_axis_size % groups or w.shape[0] % groups:
        raise ValueError(f"{op}: channels not divisible by groups={groups}: {x.shape}, {w.shape}")


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride=1, padding=0, groups: int = 1) -> Tensor:
    """Cross-correlation over ``(B, Cin, H, W)`` with weight ``(Cout, Cin/groups, kh, kw)``."""
    x, weight = as_tensor(x), as_tensor(weight)
    _check_conv("conv2d", x, weight, groups, x.shape[1] if x.ndim == 4 else 0)
    if weight.shape[1] * groups != x.shape[1]:
        raise ValueError(f"conv2d: shape mismatch input {x.shape} vs weight {weight.shape} (groups={groups})")
    stride, padding = _pair(stride), _pair(padding)
    if x.shape[2] + 2 * padding[0] < weight.shape[2] or x.shape[3] + 2 * padding[1] < weight.shape[3]:
        raise ValueError(f"conv2d: kernel {weight.shape[2:]} larger than padded input {x.shape[2:]}")
    out = _conv2d_fwd(x.data, weight.data, stride, padding, groups)
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (weight.shape[0],):
            raise ValueError(f"conv2d: bias shape {bias.shape} vs {weight.shape[0]} output channels")
        out += bias.data[:, None, None]
        parents.append(bias)
    xd, wd = x.data, weight.data

    def back(g):
        grads = [
            _conv2d_grad_input(g, wd, xd.shape, stride, padding, groups) if x.requires_grad else None,
            _conv2d_grad_weight(g, xd, wd.shape, stride, padding, groups) if weight.requires_grad else None,
        ]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    return make_result(out, parents, back, "conv2d")


def conv1d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0, groups: int = 1) -> Tensor:
    """1-D cross-correlation over ``(B, Cin, N)`` with weight ``(Cout, Cin/groups, k)``."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 3 or weight.ndim != 3:
        raise ValueError(f"conv1d: expected 3-D input and weight, got {x.shape} and {weight.shape}")
    b, c, n = x.shape
    x4 = reshape(x, (b, c, 1, n))
    w4 = reshape(weight, (weight.shape[0], weight.shape[1], 1, weight.shape[2]))
    out = conv2d(x4, w4, bias, stride=(1, stride), padding=(0, padding), groups=groups)
    return reshape(out, (b, out.shape[1], out.shape[3]))


def conv_transpose2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride=1, padding=0) -> Tensor:
    """Adjoint of :func:`conv2d`; weight is ``(Cin, Cout, kh, kw)``."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 4 or weight.ndim != 4 or weight.shape[0] != x.shape[1]:
        raise ValueError(f"conv_transpose2d: shape mismatch input {x.shape} vs weight {weight.shape}")
    stride, padding = _pair(stride), _pair(padding)
    b, _, hi, wi = x.shape
    kh, kw = weight.shape[2:]
    ho = (hi - 1) * stride[0] - 2 * padding[0] + kh
    wo = (wi - 1) * stride[1] - 2 * padding[1] + kw
    if ho <= 0 or wo <= 0:
        raise ValueError(f"conv_transpose2d: empty output for input {x.shape} and weight {weight.shape}")
    out_shape = (b, weight.shape[1], ho, wo)
    xd, wd = x.data, weight.data
    out = _conv2d_grad_input(xd, wd, out_shape, stride, padding, 1)
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (weight.shape[1],):
            raise ValueError(f"conv_transpose2d: bias shape {bias.shape} vs {weight.shape[1]} output channels")
        out = out + bias.data[:, None, None]
        parents.append(bias)

    def back(g):
        grads = [
            _conv2d_fwd(g, wd, stride, padding, 1) if x.requires_grad else None,
            _conv2d_grad_weight(xd, g, wd.shape, stride, padding, 1) if weight.requires_grad else None,
        ]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    return make_result(out, parents, back, "conv_transpose2d")


# ---------------------------------------------------------------- spectral ops

def complex_magnitude(x: Tensor, axis: int = 0) -> Tensor:
    """sqrt(re^2 + im^2) where ``axis`` (size 2) holds (real, imag); that axis is removed."""
    x = as_tensor(x)
    axis = axis % x.ndim
    if x.shape[axis] != 2:
        raise ValueError(f"complex_magnitude: axis {axis} of {x.shape} must have size 2")
    re = np.take(x.data, 0, axis=axis)
    im = np.take(x.data, 1, axis=axis)
    mag = np.sqrt(re * re + im * im)

    def back(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(mag > 0, g / mag, 0.0)
        return (np.stack([re * inv, im * inv], axis=axis),)

    return make_result(mag, (x,), back, "complex_magnitude")


def rfft(x: Tensor, n: int) -> tuple[Tensor, Tensor]:
    """One-sided DFT along the last axis (zero-padded/truncated to ``n``) as (real, imag)."""
    x = as_tensor(x)
    length = x.shape[-1]
    spec = np.fft.rfft(x.data, n, axis=-1)
    both = np.stack([spec.real, spec.imag])
    # adjoint of X = rfft(x): x_bar = n * irfft(G * w), interior bins halved
    weights = np.full(n // 2 + 1, 0.5)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0

    def back(g):
        z = (g[0] + 1j * g[1]) * weights
        gx = n * np.fft.irfft(z, n, axis=-1)
        if length <= n:
            return (gx[..., :length],)
        pad = [(0, 0)] * (gx.ndim - 1) + [(0, length - n)]
        return (np.pad(gx, pad),)

    packed = make_result(both, (x,), back, "rfft")
    return packed[0], packed[1]


def irfft(re: Tensor, im: Tensor, n: int) -> Tensor:
    """Inverse of :func:`rfft` for a one-sided spectrum; imag parts of DC/Nyquist are ignored."""
    re, im = as_tensor(re), as_tensor(im)
    _same_shape("irfft", re, im)
    if re.shape[-1] != n // 2 + 1:
        raise ValueError(f"irfft: expected {n // 2 + 1} bins for n={n}, got {re.shape}")
    out = np.fft.irfft(re.data + 1j * im.data, n, axis=-1)
    scale = np.full(n // 2 + 1, 2.0 / n)
    scale[0] = 1.0 / n
    if n % 2 == 0:
        scale[-1] = 1.0 / n

    def back(g):
        spec = np.fft.rfft(g, n, axis=-1)
        gre = spec.real * scale
        gim = spec.imag * scale
        gim[..., 0] = 0.0
        if n % 2 == 0:
            gim[..., -1] = 0.0
        return gre, gim

    return make_result(out, (re, im), back, "irfft")


def pad_reflect(x: Tensor, pad: int) -> Tensor:
    """Reflect-pad the last axis by ``pad`` on both sides (edge sample not repeated)."""
    x = as_tensor(x)
    n = x.shape[-1]
    if pad >= n:
        raise ValueError(f"pad_reflect: pad {pad} must be smaller than length {n}")
    widths = [(0, 0)] * (x.ndim - 1) + [(pad, pad)]
    out = np.pad(x.data, widths, mode="reflect")

    def back(g):
        gx = g[..., pad:pad + n].copy()
        if pad:
            gx[..., 1:pad + 1] += g[..., :pad][..., ::-1]
            gx[..., n - pad - 1:n - 1] += g[..., pad + n:][..., ::-1]
        return (gx,)

    return make_result(out, (x,), back, "pad_reflect")


def frame(x: Tensor, frame_len: int, hop: int) -> Tensor:
    """``(..., N)`` -> ``(..., T, frame_len)`` with T = (N - frame_len) // hop + 1."""
    x = as_tensor(x)
    n = x.shape[-1]
    if n < frame_len:
        raise ValueError(f"frame: signal length {n} shorter than frame {frame_len}")
    out = _kernels.frame_signal(x.data, frame_len, hop)
    return make_result(out, (x,), lambda g: (_kernels.overlap_add(g, hop, n),), "frame")


def overlap_add(frames: Tensor, hop: int, out_len: int) -> Tensor:
    """Adjoint of :func:`frame` (sum of frames placed every ``hop`` samples)."""
    frames = as_tensor(frames)
    if frames.ndim < 2:
        raise ValueError(f"overlap_add: expected (..., T, L) frames, got {frames.shape}")
    n_frames, frame_len = frames.shape[-2:]
    out = _kernels.overlap_add(frames.data, hop, out_len)

    def back(g):
        need = (n_frames - 1) * hop + frame_len
        if need > out_len:
            widths = [(0, 0)] * (g.ndim - 1) + [(0, need - out_len)]
            g = np.pad(g, widths)
        return (_kernels.frame_signal(g, frame_len, hop)[..., :n_frames, :],)

    return make_result(out, (frames,), back, "overlap_add")
