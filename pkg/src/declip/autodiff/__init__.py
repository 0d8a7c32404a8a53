"""Minimal dense-tensor library with reverse-mode automatic differentiation."""
from . import ops
from .ops import (
    abs_sum,
    absolute,
    attention,
    add,
    clamp_min,
    complex_magnitude,
    concat,
    conv1d,
    conv2d,
    conv_transpose2d,
    div,
    exp,
    expand,
    frame,
    irfft,
    layer_stats_norm,
    leaky_relu,
    log,
    matmul,
    mean,
    mul,
    overlap_add,
    pad_reflect,
    prelu,
    reshape,
    rfft,
    softmax,
    sqrt,
    sub,
    sum_squares,
    transpose,
)
from .serialize import dump_tensor, load_tensor, tensor_from_bytes, tensor_to_bytes
from .tensor import Tensor, as_tensor, backward, is_grad_enabled, no_grad


class Parameter(Tensor):
    """A named leaf tensor that always requires grad."""

    __slots__ = ()

    def __init__(self, data, name: str = ""):
        super().__init__(data, requires_grad=True, name=name)


__all__ = [name for name in dir() if not name.startswith("_")]
