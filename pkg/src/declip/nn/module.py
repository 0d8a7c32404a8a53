"""Tiny module system: named parameters, deterministic init, shared layers."""
from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from .. import autodiff as ad
from ..autodiff import Parameter, Tensor

# weights ~ U(-INIT_GAIN / sqrt(fan_in), +INIT_GAIN / sqrt(fan_in)); biases start at zero
INIT_GAIN = 1.0
PRELU_INIT = 0.25


class Module:
    def __init__(self):
        self._params: dict[str, Parameter] = {}
        self._children: dict[str, Module] = {}

    def __setattr__(self, key, value):
        if isinstance(value, Module):
            self.__dict__.setdefault("_children", {})[key] = value
        object.__setattr__(self, key, value)

    def add_param(self, name: str, value: np.ndarray) -> Parameter:
        p = Parameter(np.array(value, dtype=np.float64), name=name)
        self._params[name] = p
        return p

    def uniform(self, name: str, shape, fan_in: int, rng: np.random.Generator, gain: float = INIT_GAIN) -> Parameter:
        bound = gain / math.sqrt(fan_in)
        return self.add_param(name, rng.uniform(-bound, bound, size=shape))

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, p in self._params.items():
            yield prefix + name, p
        for cname, child in self._children.items():
            yield from child.named_parameters(f"{prefix}{cname}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None


class Conv2d(Module):
    def __init__(self, cin: int, cout: int, kernel: int, rng, padding: int = 0, transpose: bool = False):
        super().__init__()
        self.padding = padding
        self.transpose = transpose
        shape = (cin, cout, kernel, kernel) if transpose else (cout, cin, kernel, kernel)
        # a transposed conv's fan-in is its input channels times the kernel area too
        self.weight = self.uniform("weight", shape, cin * kernel * kernel, rng)
        self.bias = self.add_param("bias", np.zeros(cout))

    def __call__(self, x: Tensor) -> Tensor:
        if self.transpose:
            return ad.conv_transpose2d(x, self.weight, self.bias, stride=1, padding=self.padding)
        return ad.conv2d(x, self.weight, self.bias, stride=1, padding=self.padding)


class Conv1d(Module):
    def __init__(self, cin: int, cout: int, kernel: int, rng, stride: int = 1, padding: int = 0,
                 gain: float = INIT_GAIN):
        super().__init__()
        self.stride, self.padding = stride, padding
        self.weight = self.uniform("weight", (cout, cin, kernel), cin * kernel, rng, gain)
        self.bias = self.add_param("bias", np.zeros(cout))

    def __call__(self, x: Tensor) -> Tensor:
        return ad.conv1d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class Linear(Module):
    def __init__(self, din: int, dout: int, rng):
        super().__init__()
        self.weight = self.uniform("weight", (din, dout), din, rng)
        self.bias = self.add_param("bias", np.zeros(dout))

    def __call__(self, x: Tensor) -> Tensor:
        y = ad.matmul(x, self.weight)
        return ad.add(y, ad.expand(self.bias, y.shape))


class LayerNorm(Module):
    """Normalise over the last axis, then per-feature gain and shift."""

    def __init__(self, dim: int, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.gain = self.add_param("gain", np.ones(dim))
        self.shift = self.add_param("shift", np.zeros(dim))

    def __call__(self, x: Tensor) -> Tensor:
        z = ad.layer_stats_norm(x, axes=-1, eps=self.eps)
        return ad.add(ad.mul(z, ad.expand(self.gain, z.shape)), ad.expand(self.shift, z.shape))


class PReLU(Module):
    def __init__(self, channels: int, axis: int = 1):
        super().__init__()
        self.axis = axis
        self.slope = self.add_param("slope", np.full(channels, PRELU_INIT))

    def __call__(self, x: Tensor) -> Tensor:
        return ad.prelu(x, self.slope, axis=self.axis)
