"""Reverse-mode automatic differentiation over dense numpy arrays.

The operation set is exactly what the text classifiers need: affine maps,
elementwise nonlinearities, sequence slicing/concatenation, reductions,
embedding lookup, valid 1-D convolution, softmax and cross-entropy, plus an
Adam optimizer. Training runs in float32 by default; gradient-check tests
switch to float64 via `using_dtype`.

A graph instance is single-writer: one thread builds and backpropagates it.
Parameter tensors may be read concurrently once training is done.
"""

from __future__ import annotations

import contextlib

import numpy as np

__all__ = [
    "Tensor",
    "AutogradError",
    "ShapeError",
    "default_dtype",
    "set_default_dtype",
    "using_dtype",
    "add",
    "sub",
    "mul",
    "neg",
    "matmul",
    "sigmoid",
    "tanh",
    "relu",
    "concat",
    "slice_axis",
    "reshape",
    "max_over_axis",
    "mean_over_axis",
    "embedding_gather",
    "conv1d",
    "softmax",
    "cross_entropy",
    "Adam",
]

CROSS_ENTROPY_CLAMP = 1e-12

_default_dtype = np.float32


class AutogradError(Exception):
    pass


class ShapeError(AutogradError):
    pass


def default_dtype():
    return _default_dtype


def set_default_dtype(dtype) -> None:
    global _default_dtype
    dt = np.dtype(dtype)
    if dt not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"unsupported tensor dtype {dtype!r}; use float32 or float64")
    _default_dtype = dt.type


@contextlib.contextmanager
def using_dtype(dtype):
    """Temporarily switch the dtype new tensors are created with."""
    global _default_dtype
    previous = _default_dtype
    set_default_dtype(dtype)
    try:
        yield
    finally:
        _default_dtype = previous


class Tensor:
    """A dense real tensor, optionally tracked for reverse-mode gradients.

    Gradients accumulate (+=) into `grad` across backward calls until
    `zero_grad` resets them. Tensors created with requires_grad=True start
    with a zero gradient buffer.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=default_dtype())
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(self.data) if requires_grad else None
        self._parents = ()
        self._backward = None
        self.op = "leaf"

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def _accumulate(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self) -> None:
        """Backpropagate from a scalar loss through the recorded graph.

        Visits each node exactly once in reverse topological order. Graphs
        from long unrolled sequences get deep, so the traversal is iterative.
        """
        if self.data.size != 1:
            raise AutogradError(f"backward requires a scalar loss, got shape {self.shape}")
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # operator sugar used by the layer implementations
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __repr__(self) -> str:
        return f"Tensor(op={self.op!r}, shape={self.shape}, requires_grad={self.requires_grad})"


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, parents, backward, op: str) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.requires_grad = any(p.requires_grad for p in parents)
    out.grad = None
    out.op = op
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward
    else:
        out._parents = ()
        out._backward = None
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Reduce a gradient back to `shape` after numpy broadcasting."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}") from None

    def backward(g):
        a._accumulate(_unbroadcast(g, a.shape))
        b._accumulate(_unbroadcast(g, b.shape))

    return _result(data, (a, b), backward, "add")


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data - b.data
    except ValueError:
        raise ShapeError(f"sub: incompatible shapes {a.shape} and {b.shape}") from None

    def backward(g):
        a._accumulate(_unbroadcast(g, a.shape))
        b._accumulate(-_unbroadcast(g, b.shape))

    return _result(data, (a, b), backward, "sub")


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}") from None

    def backward(g):
        a._accumulate(_unbroadcast(g * b.data, a.shape))
        b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _result(data, (a, b), backward, "mul")


def neg(a) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        a._accumulate(-g)

    return _result(-a.data, (a,), backward, "neg")


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    data = a.data @ b.data

    def backward(g):
        a._accumulate(g @ b.data.T)
        b._accumulate(a.data.T @ g)

    return _result(data, (a, b), backward, "matmul")


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    # overflow-free branch: exp of a non-positive argument only
    z = np.exp(-np.abs(a.data))
    y = np.where(a.data >= 0, 1.0 / (1.0 + z), z / (1.0 + z))

    def backward(g):
        a._accumulate(g * y * (1.0 - y))

    return _result(y, (a,), backward, "sigmoid")


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    y = np.tanh(a.data)

    def backward(g):
        a._accumulate(g * (1.0 - y * y))

    return _result(y, (a,), backward, "tanh")


def relu(a) -> Tensor:
    a = _as_tensor(a)
    y = np.maximum(a.data, 0)

    def backward(g):
        a._accumulate(g * (a.data > 0))

    return _result(y, (a,), backward, "relu")


def concat(tensors, axis: int) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat: empty input list")
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError(f"concat: incompatible shapes {[t.shape for t in tensors]}") from None
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
            index = [slice(None)] * g.ndim
            index[axis] = slice(start, stop)
            t._accumulate(g[tuple(index)])

    return _result(data, tensors, backward, "concat")


def slice_axis(a, axis: int, start: int, stop: int) -> Tensor:
    a = _as_tensor(a)
    if not (0 <= start <= stop <= a.shape[axis]):
        raise ShapeError(f"slice_axis: [{start}:{stop}] out of bounds for axis {axis} of shape {a.shape}")
    index = [slice(None)] * a.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    data = a.data[index]

    def backward(g):
        full = np.zeros_like(a.data)
        full[index] = g
        a._accumulate(full)

    return _result(data, (a,), backward, "slice")


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    try:
        data = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {a.shape} as {shape}") from None
    original = a.shape

    def backward(g):
        a._accumulate(g.reshape(original))

    return _result(data, (a,), backward, "reshape")


def max_over_axis(a, axis: int) -> Tensor:
    a = _as_tensor(a)
    if a.shape[axis] == 0:
        raise ShapeError(f"max_over_axis: empty axis {axis} of shape {a.shape}")
    data = a.data.max(axis=axis)
    # route gradient to the first maximum along the axis
    winners = np.expand_dims(a.data.argmax(axis=axis), axis)

    def backward(g):
        full = np.zeros_like(a.data)
        np.put_along_axis(full, winners, np.expand_dims(g, axis), axis=axis)
        a._accumulate(full)

    return _result(data, (a,), backward, "max_over_axis")


def mean_over_axis(a, axis: int) -> Tensor:
    a = _as_tensor(a)
    n = a.shape[axis]
    if n == 0:
        raise ShapeError(f"mean_over_axis: empty axis {axis} of shape {a.shape}")
    data = a.data.mean(axis=axis)

    def backward(g):
        a._accumulate(np.repeat(np.expand_dims(g / n, axis), n, axis=axis))

    return _result(data, (a,), backward, "mean_over_axis")


def embedding_gather(matrix, indices) -> Tensor:
    """Gather rows of `matrix` (vocab x dim) by an integer index array."""
    matrix = _as_tensor(matrix)
    indices = np.asarray(indices)
    if matrix.ndim != 2:
        raise ShapeError(f"embedding_gather: matrix must be 2-D, got {matrix.shape}")
    if indices.size and (indices.min() < 0 or indices.max() >= matrix.shape[0]):
        raise ShapeError(
            f"embedding_gather: index out of range for {matrix.shape[0]} rows "
            f"(min {indices.min()}, max {indices.max()})"
        )
    data = matrix.data[indices]

    def backward(g):
        # gather gradient is scatter-add into the gathered rows
        full = np.zeros_like(matrix.data)
        np.add.at(full, indices, g)
        matrix._accumulate(full)

    return _result(data, (matrix,), backward, "embedding_gather")


def conv1d(x, kernels, bias=None) -> Tensor:
    """Valid (no-padding) correlation along the sequence axis.

    x: [batch, length, channels]; kernels: [k, channels, filters];
    bias: [filters] or None. Output: [batch, length - k + 1, filters].
    """
    x, kernels = _as_tensor(x), _as_tensor(kernels)
    if x.ndim != 3 or kernels.ndim != 3 or x.shape[2] != kernels.shape[1]:
        raise ShapeError(f"conv1d: incompatible shapes input {x.shape}, kernels {kernels.shape}")
    k = kernels.shape[0]
    if x.shape[1] < k:
        raise ShapeError(f"conv1d: sequence length {x.shape[1]} shorter than kernel {k}")
    windows = np.lib.stride_tricks.sliding_window_view(x.data, k, axis=1)  # [B, Lo, C, k]
    data = np.einsum("bock,kcf->bof", windows, kernels.data)
    parents = [x, kernels]
    if bias is not None:
        bias = _as_tensor(bias)
        if bias.shape != (kernels.shape[2],):
            raise ShapeError(f"conv1d: bias shape {bias.shape} does not match {kernels.shape[2]} filters")
        data = data + bias.data
        parents.append(bias)

    def backward(g):
        x_grad = np.zeros_like(x.data)
        out_len = g.shape[1]
        for d in range(k):
            x_grad[:, d : d + out_len, :] += g @ kernels.data[d].T
        x._accumulate(x_grad)
        kernels._accumulate(np.einsum("bock,bof->kcf", windows, g))
        if bias is not None:
            bias._accumulate(g.sum(axis=(0, 1)))

    return _result(data, parents, backward, "conv1d")


def softmax(a, axis: int = -1) -> Tensor:
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * y).sum(axis=axis, keepdims=True)
        a._accumulate((g - inner) * y)

    return _result(y, (a,), backward, "softmax")


def cross_entropy(probabilities, one_hot) -> Tensor:
    """Mean negative log-likelihood of one-hot targets under given probabilities.

    Probabilities are clamped below at 1e-12 before the log; the clamped
    region contributes zero gradient.
    """
    probabilities = _as_tensor(probabilities)
    one_hot = np.asarray(one_hot, dtype=probabilities.data.dtype)
    if probabilities.ndim != 2 or one_hot.shape != probabilities.shape:
        raise ShapeError(
            f"cross_entropy: probabilities {probabilities.shape} vs targets {one_hot.shape}"
        )
    batch = probabilities.shape[0]
    clamped = np.maximum(probabilities.data, CROSS_ENTROPY_CLAMP)
    data = np.asarray(-(one_hot * np.log(clamped)).sum() / batch, dtype=probabilities.data.dtype)

    def backward(g):
        grad = np.where(
            probabilities.data > CROSS_ENTROPY_CLAMP, -one_hot / clamped, 0.0
        ) * (g / batch)
        probabilities._accumulate(grad.astype(probabilities.data.dtype, copy=False))

    return _result(data, (probabilities,), backward, "cross_entropy")


class Adam:
    """Bias-corrected Adam over a fixed parameter list."""

    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = [p for p in params if p.requires_grad]
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        self.step_count += 1
        t = self.step_count
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            m_hat = m / (1.0 - self.beta1**t)
            v_hat = v / (1.0 - self.beta2**t)
            p.data -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.data.dtype, copy=False)
