"""Reverse-mode automatic differentiation over numpy arrays.

Every differentiable op builds its result with `Tensor._fromOp`, handing over
the parents and a closure mapping the output gradient to one gradient per
parent. `Tensor.backward` walks the recorded graph in reverse topological
order, sums gradients for shared nodes and accumulates them into the `.grad`
of differentiable leaves.
"""

import contextlib
import threading

import numpy as np


class ShapeError(ValueError):
    """Raised when an op receives operands whose dimensions do not line up."""

    def __init__(self, op: str, message: str, axes=None):
        self.op = op
        self.axes = axes
        text = f"{op}: {message}"
        if axes is not None:
            text += f" (offending axes: {axes})"
        super().__init__(text)


_precision = {"dtype": np.float32}
_local = threading.local()


def _state():
    if not hasattr(_local, "gradEnabled"):
        _local.gradEnabled = True
        _local.stopTape = None
    return _local


def defaultDtype():
    return _precision["dtype"]


@contextlib.contextmanager
def float64Mode():
    """Create tensors in 64-bit precision, used for gradient verification."""
    previous = _precision["dtype"]
    _precision["dtype"] = np.float64
    try:
        yield
    finally:
        _precision["dtype"] = previous


@contextlib.contextmanager
def noGrad():
    """Disable graph recording on the current thread."""
    state = _state()
    previous = state.gradEnabled
    state.gradEnabled = False
    try:
        yield
    finally:
        state.gradEnabled = previous


def isGradEnabled() -> bool:
    return _state().gradEnabled


class _StopTape:
    """Records stop-gradient values on a base evaluation and replays them later."""

    def __init__(self):
        self.values = []
        self.replaying = False
        self.position = 0

    def rewind(self):
        self.replaying = True
        self.position = 0


@contextlib.contextmanager
def stopGradientTape(tape: _StopTape):
    state = _state()
    previous = state.stopTape
    state.stopTape = tape
    try:
        yield tape
    finally:
        state.stopTape = previous


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _broadcastShape(op: str, a: "Tensor", b: "Tensor") -> tuple:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        left, right = a.shape[::-1], b.shape[::-1]
        axes = [
            -(i + 1) for i in range(min(len(left), len(right)))
            if left[i] != right[i] and 1 not in (left[i], right[i])
        ]
        raise ShapeError(op, f"cannot broadcast {a.shape} with {b.shape}", axes=axes)


def _normalizeAxis(axis, ndim: int):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(a % ndim for a in axis))


def asTensor(value) -> "Tensor":
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


class Tensor:
    """n-dimensional value with an optional gradient slot and graph linkage."""

    __array_priority__ = 100

    def __init__(self, data, requiresGrad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.array(data, dtype=dtype or defaultDtype())
        self.grad = None
        self.requiresGrad = requiresGrad
        self.op = None
        self._parents = ()
        self._backward = None

    @staticmethod
    def _fromOp(data, parents, backward, op: str) -> "Tensor":
        out = Tensor.__new__(Tensor)
        out.data = np.asarray(data)
        out.grad = None
        out.op = op
        tracked = isGradEnabled() and any(p.requiresGrad for p in parents)
        out.requiresGrad = tracked
        out._parents = tuple(parents) if tracked else ()
        out._backward = backward if tracked else None
        return out

    # ── array facts ────────────────────────────────────────────────
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def __len__(self):
        return self.data.shape[0]

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requiresGrad={self.requiresGrad})"

    # ── graph ─────────────────────────────────────────────────────
    def _topologicalOrder(self) -> list:
        order, visited = [], set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requiresGrad and id(parent) not in visited:
                    stack.append((parent, False))
        return order

    def backward(self):
        """Populate `.grad` on every differentiable leaf reachable from this scalar."""
        if self.data.size != 1:
            raise ValueError(f"backward: loss must be a scalar, got shape {self.shape}")
        if not self.requiresGrad:
            raise ValueError("backward: loss was not produced by a recorded graph")
        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(self._topologicalOrder()):
            grad = grads.pop(id(node), None)
            if grad is None:
                continue
            if node._backward is None:
                grad = np.asarray(grad, dtype=node.data.dtype).reshape(node.shape)
                node.grad = grad.copy() if node.grad is None else node.grad + grad
                continue
            for parent, parentGrad in zip(node._parents, node._backward(grad)):
                if parentGrad is None or not parent.requiresGrad:
                    continue
                parentGrad = _unbroadcast(np.asarray(parentGrad), parent.shape)
                key = id(parent)
                grads[key] = grads[key] + parentGrad if key in grads else parentGrad

    def zeroGrad(self):
        self.grad = None

    def detach(self) -> "Tensor":
        return stopGradient(self)

    # ── operators ────────────────────────────────────────────────
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(asTensor(other), self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(asTensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(asTensor(other), self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(asTensor(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getItem(self, index)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def sum(self, axis=None, keepdims=False):
        return sumOp(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def var(self, axis=None, keepdims=False):
        return var(self, axis, keepdims)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def tanh(self):
        return tanh(self)

    def relu(self):
        return relu(self)

    def sqrt(self):
        return sqrt(self)

    def abs(self):
        return absolute(self)


class Parameter(Tensor):
    """Trainable leaf tensor registered by `Module.namedParameters`."""

    def __init__(self, data, dtype=None):
        super().__init__(data, requiresGrad=True, dtype=dtype)

    def __repr__(self):
        return f"Parameter(shape={self.shape}, dtype={self.dtype}, requiresGrad={self.requiresGrad})"


# ── elementwise arithmetic ───────────────────────────────────────────
def add(a, b) -> Tensor:
    a, b = asTensor(a), asTensor(b)
    _broadcastShape("add", a, b)
    return Tensor._fromOp(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a, b) -> Tensor:
    a, b = asTensor(a), asTensor(b)
    _broadcastShape("sub", a, b)
    return Tensor._fromOp(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a, b) -> Tensor:
    a, b = asTensor(a), asTensor(b)
    _broadcastShape("mul", a, b)
    return Tensor._fromOp(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data), "mul")


def div(a, b) -> Tensor:
    a, b = asTensor(a), asTensor(b)
    _broadcastShape("div", a, b)
    return Tensor._fromOp(
        a.data / b.data, (a, b),
        lambda g: (g / b.data, -g * a.data / (b.data * b.data)), "div",
    )


def neg(a) -> Tensor:
    a = asTensor(a)
    return Tensor._fromOp(-a.data, (a,), lambda g: (-g,), "neg")


def power(a, exponent: float) -> Tensor:
    a = asTensor(a)
    return Tensor._fromOp(
        a.data ** exponent, (a,),
        lambda g: (g * exponent * a.data ** (exponent - 1),), "pow",
    )


# ── linear algebra and layout ────────────────────────────────────────
def matmul(a, b) -> Tensor:
    a, b = asTensor(a), asTensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul", f"operands need rank >= 2, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul", f"inner dimensions differ: {a.shape} @ {b.shape}", axes=(-1, -2))

    def backward(g):
        return (
            np.matmul(g, np.swapaxes(b.data, -1, -2)),
            np.matmul(np.swapaxes(a.data, -1, -2), g),
        )

    return Tensor._fromOp(np.matmul(a.data, b.data), (a, b), backward, "matmul")


def reshape(a, shape) -> Tensor:
    a = asTensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", f"cannot reshape {a.shape} into {tuple(shape)}")
    return Tensor._fromOp(out, (a,), lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a, axes=None) -> Tensor:
    a = asTensor(a)
    axes = tuple(reversed(range(a.ndim))) if axes is None else tuple(axes)
    if sorted(axis % a.ndim for axis in axes) != list(range(a.ndim)):
        raise ShapeError("transpose", f"axes {axes} are not a permutation for rank {a.ndim}")
    axes = tuple(axis % a.ndim for axis in axes)
    inverse = tuple(np.argsort(axes))
    return Tensor._fromOp(a.data.transpose(axes), (a,), lambda g: (g.transpose(inverse),), "transpose")


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [asTensor(t) for t in tensors]
    reference = tensors[0]
    axis = axis % reference.ndim
    for t in tensors[1:]:
        if t.ndim != reference.ndim:
            raise ShapeError("concat", f"rank mismatch {reference.shape} vs {t.shape}")
        bad = [i for i in range(t.ndim) if i != axis and t.shape[i] != reference.shape[i]]
        if bad:
            raise ShapeError("concat", f"shapes {reference.shape} and {t.shape} differ off the concat axis", axes=bad)
    sizes = [t.shape[axis] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, cuts, axis=axis))

    return Tensor._fromOp(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward, "concat")


def getItem(a, index) -> Tensor:
    a = asTensor(a)
    try:
        out = a.data[index]
    except IndexError as err:
        raise ShapeError("slice", str(err))

    def backward(g):
        grad = np.zeros_like(a.data)
        np.add.at(grad, index, g)
        return (grad,)

    return Tensor._fromOp(np.array(out), (a,), backward, "slice")


def broadcastTo(a, shape) -> Tensor:
    a = asTensor(a)
    try:
        out = np.broadcast_to(a.data, shape)
    except ValueError:
        raise ShapeError("broadcastTo", f"cannot broadcast {a.shape} to {tuple(shape)}")
    return Tensor._fromOp(np.array(out), (a,), lambda g: (g,), "broadcastTo")


def repeat(a, repeats: int, axis: int) -> Tensor:
    """Repeat every element `repeats` times along `axis` (nearest-neighbour upsampling)."""
    a = asTensor(a)
    axis = axis % a.ndim

    def backward(g):
        shape = list(a.shape)
        split = shape[:axis] + [shape[axis], repeats] + shape[axis + 1:]
        return (g.reshape(split).sum(axis=axis + 1),)

    return Tensor._fromOp(np.repeat(a.data, repeats, axis=axis), (a,), backward, "repeat")


def pad(a, widths, axis: int = -1) -> Tensor:
    """Zero-pad `axis` by (left, right)."""
    a = asTensor(a)
    axis = axis % a.ndim
    left, right = widths
    spec = [(0, 0)] * a.ndim
    spec[axis] = (left, right)
    index = [slice(None)] * a.ndim
    index[axis] = slice(left, left + a.shape[axis])
    index = tuple(index)
    return Tensor._fromOp(np.pad(a.data, spec), (a,), lambda g: (g[index],), "pad")


# ── reductions ───────────────────────────────────────────────────────
def _expandReduced(g, shape, axes, keepdims):
    if not keepdims:
        g = np.expand_dims(g, axes)
    return np.broadcast_to(g, shape)


def sumOp(a, axis=None, keepdims=False) -> Tensor:
    a = asTensor(a)
    axes = _normalizeAxis(axis, a.ndim)
    return Tensor._fromOp(
        a.data.sum(axis=axes, keepdims=keepdims), (a,),
        lambda g: (_expandReduced(g, a.shape, axes, keepdims).copy(),), "sum",
    )


def mean(a, axis=None, keepdims=False) -> Tensor:
    a = asTensor(a)
    axes = _normalizeAxis(axis, a.ndim)
    count = int(np.prod([a.shape[i] for i in axes])) if axes else 1
    return Tensor._fromOp(
        a.data.mean(axis=axes, keepdims=keepdims), (a,),
        lambda g: (_expandReduced(g, a.shape, axes, keepdims) / count,), "mean",
    )


def var(a, axis=None, keepdims=False) -> Tensor:
    """Population variance (divides by the element count)."""
    centred = a - mean(a, axis, keepdims=True)
    return mean(centred * centred, axis, keepdims)


def l2Norm(a, axis=-1, keepdims=False, eps: float = 1e-12) -> Tensor:
    a = asTensor(a)
    return sqrt(sumOp(a * a, axis, keepdims) + eps)


def logSumExp(a, axis=-1, keepdims=False) -> Tensor:
    a = asTensor(a)
    axes = _normalizeAxis(axis, a.ndim)
    peak = a.data.max(axis=axes, keepdims=True)
    shifted = np.exp(a.data - peak)
    total = shifted.sum(axis=axes, keepdims=True)
    out = peak + np.log(total)

    def backward(g):
        return (_expandReduced(g, a.shape, axes, keepdims) * shifted / total,)

    if not keepdims:
        out = out.squeeze(axis=axes)
    return Tensor._fromOp(out, (a,), backward, "logsumexp")


# ── pointwise nonlinearities ─────────────────────────────────────────
def exp(a) -> Tensor:
    a = asTensor(a)
    out = np.exp(a.data)
    return Tensor._fromOp(out, (a,), lambda g: (g * out,), "exp")


def log(a) -> Tensor:
    a = asTensor(a)
    return Tensor._fromOp(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def sqrt(a) -> Tensor:
    a = asTensor(a)
    out = np.sqrt(a.data)
    return Tensor._fromOp(out, (a,), lambda g: (g / (2.0 * out),), "sqrt")


def absolute(a) -> Tensor:
    a = asTensor(a)
    return Tensor._fromOp(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),), "abs")


def tanh(a) -> Tensor:
    a = asTensor(a)
    out = np.tanh(a.data)
    return Tensor._fromOp(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def sigmoid(a) -> Tensor:
    a = asTensor(a)
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return Tensor._fromOp(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def relu(a) -> Tensor:
    a = asTensor(a)
    mask = a.data > 0
    return Tensor._fromOp(a.data * mask, (a,), lambda g: (g * mask,), "relu")


def leakyRelu(a, slope: float = 0.2) -> Tensor:
    a = asTensor(a)
    scale = np.where(a.data > 0, 1.0, slope).astype(a.dtype)
    return Tensor._fromOp(a.data * scale, (a,), lambda g: (g * scale,), "leakyRelu")


def clip(a, low: float, high: float) -> Tensor:
    a = asTensor(a)
    mask = (a.data >= low) & (a.data <= high)
    return Tensor._fromOp(np.clip(a.data, low, high), (a,), lambda g: (g * mask,), "clip")


def softmax(a, axis: int = -1) -> Tensor:
    a = asTensor(a)
    shifted = np.exp(a.data - a.data.max(axis=axis, keepdims=True))
    out = shifted / shifted.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return Tensor._fromOp(out, (a,), backward, "softmax")


def logSoftmax(a, axis: int = -1) -> Tensor:
    a = asTensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    logTotal = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - logTotal
    probabilities = np.exp(out)

    def backward(g):
        return (g - probabilities * g.sum(axis=axis, keepdims=True),)

    return Tensor._fromOp(out, (a,), backward, "logSoftmax")


# ── gathering and gradient control ───────────────────────────────────
def embedding(weight, indices) -> Tensor:
    """Row lookup `weight[indices]` for an integer index array."""
    weight = asTensor(weight)
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size and (indices.min() < 0 or indices.max() >= weight.shape[0]):
        raise ShapeError("embedding", f"index out of range for table of {weight.shape[0]} rows", axes=(0,))

    def backward(g):
        grad = np.zeros_like(weight.data)
        np.add.at(grad, indices, g)
        return (grad,)

    return Tensor._fromOp(weight.data[indices], (weight,), backward, "embedding")


def stopGradient(a) -> Tensor:
    """Identity in the forward pass; no gradient flows back through it.

    Under a recording `stopGradientTape` the forward value is remembered; when
    the tape replays, the remembered value is returned instead, which turns the
    op into a true constant for finite-difference checks.
    """
    a = asTensor(a)
    tape = _state().stopTape
    value = a.data
    if tape is not None:
        if tape.replaying:
            value = tape.values[tape.position]
            tape.position += 1
        else:
            tape.values.append(a.data.copy())
    out = Tensor.__new__(Tensor)
    out.data = value
    out.grad = None
    out.op = "stopGradient"
    out.requiresGrad = False
    out._parents = ()
    out._backward = None
    return out


# ── convolution ─────────────────────────────────────────────────────
def conv1d(x, weight, bias=None, stride: int = 1, padding=0, dilation: int = 1) -> Tensor:
    """1-D cross-correlation. x: [batch, inChannels, time], weight: [out, in, kernel]."""
    x, weight = asTensor(x), asTensor(weight)
    if x.ndim != 3 or weight.ndim != 3:
        raise ShapeError("conv1d", f"expected x [B,C,T] and weight [O,C,K], got {x.shape} and {weight.shape}")
    if x.shape[1] != weight.shape[1]:
        raise ShapeError("conv1d", f"input channels {x.shape[1]} != weight channels {weight.shape[1]}", axes=(1,))
    left, right = (padding, padding) if isinstance(padding, int) else padding
    kernel = weight.shape[2]
    span = (kernel - 1) * dilation + 1
    padded = np.pad(x.data, ((0, 0), (0, 0), (left, right)))
    paddedLength = padded.shape[2]
    if paddedLength < span:
        raise ShapeError("conv1d", f"time length {x.shape[2]} (+padding) shorter than kernel span {span}", axes=(2,))
    windows = np.lib.stride_tricks.sliding_window_view(padded, span, axis=2)[:, :, ::stride, ::dilation]
    outLength = windows.shape[2]
    out = np.tensordot(windows, weight.data, axes=([1, 3], [1, 2])).transpose(0, 2, 1)
    parents = [x, weight]
    if bias is not None:
        bias = asTensor(bias)
        out = out + bias.data[None, :, None]
        parents.append(bias)

    def backward(g):
        gradWeight = np.tensordot(g, windows, axes=([0, 2], [0, 2]))
        columns = np.tensordot(g, weight.data, axes=([1], [0])).transpose(0, 2, 1, 3)
        gradPadded = np.zeros_like(padded)
        last = stride * (outLength - 1) + 1
        for k in range(kernel):
            start = k * dilation
            gradPadded[:, :, start:start + last:stride] += columns[:, :, :, k]
        gradX = gradPadded[:, :, left:left + x.shape[2]]
        grads = [gradX, gradWeight]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2)))
        return tuple(grads)

    return Tensor._fromOp(np.ascontiguousarray(out), parents, backward, "conv1d")


def avgPool1d(x, kernel: int, stride: int, padding: int = 0) -> Tensor:
    """Average pooling over time for [batch, channel, time], zero padding included in the count."""
    x = asTensor(x)
    batch, channels, length = x.shape
    window = Tensor(np.full((1, 1, kernel), 1.0 / kernel), dtype=x.dtype)
    pooled = conv1d(x.reshape(batch * channels, 1, length), window, stride=stride, padding=padding)
    return pooled.reshape(batch, channels, pooled.shape[2])
