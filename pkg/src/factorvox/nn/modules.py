import contextlib

import numpy as np

from ..autodiff import tensor as T
from ..autodiff.tensor import Tensor, Parameter, ShapeError


class Module():
    """Base class: parameters and buffers are discovered from attributes.

    Attributes holding a `Parameter` are trainable, plain `Tensor` attributes
    are buffers (saved in checkpoints, never optimized). Sub-modules may sit
    directly on an attribute or inside a list.
    """

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError(f"{type(self).__name__} does not implement forward")

    def namedTensors(self, prefix: str = ""):
        for name, value in vars(self).items():
            if name.startswith("_"):
                continue
            if isinstance(value, Tensor):
                yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.namedTensors(f"{prefix}{name}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.namedTensors(f"{prefix}{name}.{i}.")
                    elif isinstance(item, Tensor):
                        yield f"{prefix}{name}.{i}", item

    def namedParameters(self, prefix: str = "") -> dict:
        return {name: t for name, t in self.namedTensors(prefix) if isinstance(t, Parameter)}

    def parameters(self) -> list:
        return list(self.namedParameters().values())

    def stateDict(self) -> dict:
        return {name: t.data for name, t in self.namedTensors()}

    def loadStateDict(self, tensors: dict):
        for name, t in self.namedTensors():
            if name not in tensors:
                raise KeyError(f"checkpoint is missing tensor '{name}'")
            value = np.asarray(tensors[name])
            if value.size != t.data.size:
                raise ShapeError("loadStateDict", f"'{name}' has {value.size} values, expected shape {t.shape}")
            t.data = value.reshape(t.shape).astype(t.data.dtype)

    def zeroGrad(self):
        for t in self.parameters():
            t.grad = None


@contextlib.contextmanager
def frozen(*modules):
    """Temporarily stop parameters of `modules` from accumulating gradient.

    Gradients still flow through the frozen computation to other inputs.
    """
    params = [p for m in modules for p in m.parameters() if p.requiresGrad]
    for p in params:
        p.requiresGrad = False
    try:
        yield
    finally:
        for p in params:
            p.requiresGrad = True


def _init(rng, shape, fanIn: int, zeroInit: bool):
    if zeroInit:
        return np.zeros(shape)
    bound = 1.0 / np.sqrt(fanIn)
    return rng.uniform(-bound, bound, size=shape)


class Linear(Module):
    """y = x @ W + b over the last axis."""

    def __init__(self, inFeatures: int, outFeatures: int, rng, bias: bool = True, zeroInit: bool = False):
        self.inFeatures = inFeatures
        self.outFeatures = outFeatures
        self.weight = Parameter(_init(rng, (inFeatures, outFeatures), inFeatures, zeroInit))
        self.bias = Parameter(np.zeros(outFeatures)) if bias else None

    def forward(self, x):
        if x.shape[-1] != self.inFeatures:
            raise ShapeError("linear", f"expected last axis {self.inFeatures}, got {x.shape}", axes=(-1,))
        y = T.matmul(x, self.weight)
        return y + self.bias if self.bias is not None else y


class Conv1d(Module):
    """1-D convolution on [batch, channel, time]; 'same' padding keeps the time length."""

    def __init__(self, inChannels: int, outChannels: int, kernelSize: int, rng,
                 stride: int = 1, padding="same", dilation: int = 1, zeroInit: bool = False):
        if padding == "same":
            if kernelSize % 2 == 0:
                raise ValueError(f"'same' padding needs an odd kernel, got {kernelSize}")
            padding = (kernelSize - 1) // 2 * dilation
        self.stride = stride
        self.padding = padding
        self.dilation = dilation
        self.weight = Parameter(_init(rng, (outChannels, inChannels, kernelSize), inChannels * kernelSize, zeroInit))
        self.bias = Parameter(np.zeros(outChannels))

    def forward(self, x):
        return T.conv1d(x, self.weight, self.bias, stride=self.stride, padding=self.padding, dilation=self.dilation)
