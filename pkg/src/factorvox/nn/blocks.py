import numpy as np

from ..autodiff import tensor as T
from ..autodiff.tensor import Tensor, Parameter, ShapeError
from .modules import Module, Linear, Conv1d


def instanceNorm(x, eps: float = 1e-5):
    """Normalize every (batch, channel) row of [batch, channel, time] over time."""
    if eps <= 0:
        raise ValueError(f"instance_norm: eps must be positive, got {eps}")
    if x.ndim != 3:
        raise ShapeError("instance_norm", f"expected [batch, channel, time], got {x.shape}")
    if x.shape[2] < 2:
        raise ValueError(f"instance_norm: time length must be >= 2, got {x.shape[2]}")
    centred = x - T.mean(x, axis=2, keepdims=True)
    variance = T.mean(centred * centred, axis=2, keepdims=True)
    return centred / T.sqrt(variance + eps)


class MLP(Module):
    """Stack of Linear layers with a nonlinearity between them."""

    def __init__(self, sizes: list, rng, activation: str = "tanh", zeroInitLast: bool = False):
        self.activation = activation
        self.layers = [
            Linear(sizes[i], sizes[i + 1], rng, zeroInit=zeroInitLast and i == len(sizes) - 2)
            for i in range(len(sizes) - 1)
        ]

    def forward(self, x):
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = T.tanh(x) if self.activation == "tanh" else T.leakyRelu(x)
        return x


class ConvStack(Module):
    """Same-padded conv layers with LeakyReLU between them (and after the last unless `linearOut`)."""

    def __init__(self, channels: list, kernelSize: int, rng, linearOut: bool = True):
        self.linearOut = linearOut
        self.layers = [Conv1d(channels[i], channels[i + 1], kernelSize, rng) for i in range(len(channels) - 1)]

    def forward(self, x):
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1 or not self.linearOut:
                x = T.leakyRelu(x)
        return x


class MultiScaleResBlock(Module):
    """Pre-activation residual block with parallel kernels {3, 5, 7}.

    y = x + mean_k conv_k(act(norm(x))). `norm` defaults to instance
    normalization; callers may pass their own (e.g. a style-conditioned one).
    """

    def __init__(self, channels: int, rng, kernelSizes=(3, 5, 7), zeroInit: bool = False):
        self.kernelSizes = tuple(kernelSizes)
        self.branches = [Conv1d(channels, channels, k, rng, zeroInit=zeroInit) for k in self.kernelSizes]

    def forward(self, x, norm=None):
        h = instanceNorm(x) if norm is None else norm(x)
        h = T.leakyRelu(h)
        total = None
        for branch in self.branches:
            out = branch(h)
            total = out if total is None else total + out
        return x + total * (1.0 / len(self.branches))


class MultiHeadAttention(Module):
    """Scaled dot-product attention over [batch, time, width] with `heads` heads."""

    def __init__(self, width: int, heads: int, rng, zeroInitOutput: bool = False):
        if width % heads != 0:
            raise ValueError(f"attention width {width} is not divisible by {heads} heads")
        self.width = width
        self.heads = heads
        self.headWidth = width // heads
        self.query = Linear(width, width, rng)
        self.key = Linear(width, width, rng)
        self.value = Linear(width, width, rng)
        self.output = Linear(width, width, rng, zeroInit=zeroInitOutput)

    def _split(self, x):
        batch, length, _ = x.shape
        return x.reshape(batch, length, self.heads, self.headWidth).transpose(0, 2, 1, 3)

    def forward(self, q, k, v, returnWeights: bool = False):
        for name, t in (("query", q), ("key", k), ("value", v)):
            if t.ndim != 3 or t.shape[2] != self.width:
                raise ShapeError("multi_head_attention", f"{name} must be [batch, time, {self.width}], got {t.shape}", axes=(2,))
        if k.shape[1] != v.shape[1]:
            raise ShapeError("multi_head_attention", f"key length {k.shape[1]} != value length {v.shape[1]}", axes=(1,))
        batch, length = q.shape[0], q.shape[1]
        qh = self._split(self.query(q))
        kh = self._split(self.key(k))
        vh = self._split(self.value(v))
        scores = T.matmul(qh, kh.transpose(0, 1, 3, 2)) * (1.0 / np.sqrt(self.headWidth))
        weights = T.softmax(scores, axis=-1)
        mixed = T.matmul(weights, vh).transpose(0, 2, 1, 3).reshape(batch, length, self.width)
        out = self.output(mixed)
        return (out, weights) if returnWeights else out


class CrossAttentionPool(Module):
    """One attention pass of a query sequence over a context sequence, residual-added to the query."""

    def __init__(self, width: int, heads: int, rng, zeroInitOutput: bool = True):
        self.attention = MultiHeadAttention(width, heads, rng, zeroInitOutput=zeroInitOutput)

    def forward(self, querySeq, contextSeq):
        return querySeq + self.attention(querySeq, contextSeq, contextSeq)


class AttentionPool(Module):
    """Pool [batch, time, width] into [batch, width] with a learned query token."""

    def __init__(self, width: int, heads: int, rng):
        self.token = Parameter(rng.normal(0.0, 1.0 / np.sqrt(width), size=(1, 1, width)))
        self.attention = MultiHeadAttention(width, heads, rng)

    def forward(self, x):
        batch = x.shape[0]
        query = T.broadcastTo(self.token, (batch, 1, x.shape[2]))
        pooled = self.attention(query, x, x)
        return pooled.reshape(batch, x.shape[2])
