"""Network layers for the text classifiers.

Embedding lookup, 1-D convolution block, max-over-time pooling, dense,
dropout and spatial (whole-word) dropout, LSTM and GRU cells, and a
bidirectional wrapper. Layers are parameter containers plus pure functions
of (input, parameters, mode, mask rng); recurrent layers mask padded steps
by true length so trailing pads never change the final state.
"""

from __future__ import annotations

import math

import numpy as np

from . import autograd as ag
from .autograd import Tensor

ACTIVATIONS = ("linear", "relu", "tanh", "sigmoid", "softmax")


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _apply_activation(x: Tensor, activation: str) -> Tensor:
    if activation == "linear":
        return x
    if activation == "relu":
        return ag.relu(x)
    if activation == "tanh":
        return ag.tanh(x)
    if activation == "sigmoid":
        return ag.sigmoid(x)
    if activation == "softmax":
        return ag.softmax(x, axis=-1)
    raise ValueError(f"unknown activation {activation!r}; expected one of {ACTIVATIONS}")


class Embedding:
    """Token-index to vector lookup backed by a (vocab x dim) matrix.

    Row `pad_index` is the zero vector and is kept out of gradient updates.
    """

    def __init__(self, matrix: np.ndarray, trainable: bool = True, pad_index: int = 0):
        # private copy: training must never mutate the caller's matrix
        matrix = np.array(matrix, dtype=ag.default_dtype())
        self.matrix = Tensor(matrix, requires_grad=trainable)
        self.pad_index = pad_index
        self.matrix.data[pad_index] = 0.0

    def forward(self, indices: np.ndarray) -> Tensor:
        return ag.embedding_gather(self.matrix, indices)

    def zero_pad_grad(self) -> None:
        """Blank the pad row's gradient so the pad vector stays exactly zero."""
        if self.matrix.requires_grad and self.matrix.grad is not None:
            self.matrix.grad[self.pad_index] = 0.0

    def params(self, prefix: str):
        return [(f"{prefix}.matrix", self.matrix)]


class Dense:
    def __init__(self, in_dim: int, units: int, activation: str = "linear", *, rng: np.random.Generator):
        self.w = Tensor(glorot_uniform(rng, (in_dim, units), in_dim, units), requires_grad=True)
        self.b = Tensor(np.zeros(units), requires_grad=True)
        self.activation = activation

    def forward(self, x: Tensor) -> Tensor:
        return _apply_activation(ag.add(ag.matmul(x, self.w), self.b), self.activation)

    def params(self, prefix: str):
        return [(f"{prefix}.w", self.w), (f"{prefix}.b", self.b)]


class Conv1D:
    """Valid 1-D convolution over [batch, length, channels] input."""

    def __init__(self, in_channels: int, filters: int, kernel_size: int, activation: str = "relu",
                 *, rng: np.random.Generator):
        fan_in = kernel_size * in_channels
        self.kernels = Tensor(
            glorot_uniform(rng, (kernel_size, in_channels, filters), fan_in, filters),
            requires_grad=True,
        )
        self.bias = Tensor(np.zeros(filters), requires_grad=True)
        self.activation = activation

    def forward(self, x: Tensor) -> Tensor:
        return _apply_activation(ag.conv1d(x, self.kernels, self.bias), self.activation)

    def params(self, prefix: str):
        return [(f"{prefix}.kernels", self.kernels), (f"{prefix}.bias", self.bias)]


class Dropout:
    """Inverted dropout: eval mode is the identity."""

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate

    def forward(self, x: Tensor, mode: str, rng: np.random.Generator | None = None) -> Tensor:
        if mode != "train" or self.rate == 0.0:
            return x
        keep = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return ag.mul(x, Tensor(keep))

    def params(self, prefix: str):
        return []


class SpatialDropout:
    """Dropout of whole word vectors: one Bernoulli draw per (batch, position)."""

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"spatial dropout rate must be in [0, 1), got {rate}")
        self.rate = rate

    def forward(self, x: Tensor, mode: str, rng: np.random.Generator | None = None) -> Tensor:
        if mode != "train" or self.rate == 0.0:
            return x
        batch, length, _ = x.shape
        keep = (rng.random((batch, length, 1)) >= self.rate) / (1.0 - self.rate)
        return ag.mul(x, Tensor(keep))

    def params(self, prefix: str):
        return []


def max_pool_over_time(x: Tensor) -> Tensor:
    """Maximum over the sequence axis, per filter: [B, L, F] -> [B, F]."""
    return ag.max_over_axis(x, 1)


def flatten(x: Tensor) -> Tensor:
    return ag.reshape(x, (x.shape[0], -1))


class LSTMCell:
    """Standard LSTM cell; gate order i, f, g, o; forget-gate bias starts at 1."""

    def __init__(self, in_dim: int, hidden: int, *, rng: np.random.Generator):
        self.hidden = hidden
        self.w = Tensor(glorot_uniform(rng, (in_dim, 4 * hidden), in_dim, hidden), requires_grad=True)
        self.u = Tensor(glorot_uniform(rng, (hidden, 4 * hidden), hidden, hidden), requires_grad=True)
        bias = np.zeros(4 * hidden)
        bias[hidden : 2 * hidden] = 1.0
        self.b = Tensor(bias, requires_grad=True)

    def initial_state(self, batch: int):
        zeros = np.zeros((batch, self.hidden))
        return (Tensor(zeros), Tensor(zeros.copy()))

    def step(self, x_t: Tensor, state):
        h, c = state
        H = self.hidden
        z = ag.add(ag.add(ag.matmul(x_t, self.w), ag.matmul(h, self.u)), self.b)
        i = ag.sigmoid(ag.slice_axis(z, 1, 0, H))
        f = ag.sigmoid(ag.slice_axis(z, 1, H, 2 * H))
        g = ag.tanh(ag.slice_axis(z, 1, 2 * H, 3 * H))
        o = ag.sigmoid(ag.slice_axis(z, 1, 3 * H, 4 * H))
        c_new = ag.add(ag.mul(f, c), ag.mul(i, g))
        h_new = ag.mul(o, ag.tanh(c_new))
        return (h_new, c_new)

    @staticmethod
    def output(state) -> Tensor:
        return state[0]

    def params(self, prefix: str):
        return [(f"{prefix}.w", self.w), (f"{prefix}.u", self.u), (f"{prefix}.b", self.b)]


class GRUCell:
    """Standard GRU cell: z, r gates then candidate; h' = (1-z)*h + z*h~."""

    def __init__(self, in_dim: int, hidden: int, *, rng: np.random.Generator):
        self.hidden = hidden
        self.w = Tensor(glorot_uniform(rng, (in_dim, 3 * hidden), in_dim, hidden), requires_grad=True)
        self.u_zr = Tensor(glorot_uniform(rng, (hidden, 2 * hidden), hidden, hidden), requires_grad=True)
        self.u_n = Tensor(glorot_uniform(rng, (hidden, hidden), hidden, hidden), requires_grad=True)
        self.b = Tensor(np.zeros(3 * hidden), requires_grad=True)

    def initial_state(self, batch: int):
        return Tensor(np.zeros((batch, self.hidden)))

    def step(self, x_t: Tensor, state):
        h = state
        H = self.hidden
        xw = ag.add(ag.matmul(x_t, self.w), self.b)
        hu = ag.matmul(h, self.u_zr)
        z = ag.sigmoid(ag.add(ag.slice_axis(xw, 1, 0, H), ag.slice_axis(hu, 1, 0, H)))
        r = ag.sigmoid(ag.add(ag.slice_axis(xw, 1, H, 2 * H), ag.slice_axis(hu, 1, H, 2 * H)))
        n = ag.tanh(ag.add(ag.slice_axis(xw, 1, 2 * H, 3 * H), ag.matmul(ag.mul(r, h), self.u_n)))
        return ag.add(ag.mul(ag.sub(1.0, z), h), ag.mul(z, n))

    @staticmethod
    def output(state) -> Tensor:
        return state

    def params(self, prefix: str):
        return [
            (f"{prefix}.w", self.w),
            (f"{prefix}.u_zr", self.u_zr),
            (f"{prefix}.u_n", self.u_n),
            (f"{prefix}.b", self.b),
        ]


def _masked(new, old, mask: Tensor):
    inv = ag.sub(1.0, mask)
    if isinstance(new, tuple):
        return tuple(ag.add(ag.mul(n, mask), ag.mul(o, inv)) for n, o in zip(new, old))
    return ag.add(ag.mul(new, mask), ag.mul(old, inv))


def run_recurrent(cell, embedded: Tensor, lengths: np.ndarray | None = None, reverse: bool = False) -> Tensor:
    """Run a cell over [batch, length, dim] input and return the final hidden state.

    With `lengths`, state updates at position t apply only where t < length;
    padded steps carry the state through unchanged, so appending pad tokens
    never changes the result.
    """
    batch, length, dim = embedded.shape
    state = cell.initial_state(batch)
    positions = range(length - 1, -1, -1) if reverse else range(length)
    for t in positions:
        x_t = ag.reshape(ag.slice_axis(embedded, 1, t, t + 1), (batch, dim))
        new_state = cell.step(x_t, state)
        if lengths is None:
            state = new_state
        else:
            mask = Tensor((t < lengths).astype(embedded.data.dtype)[:, None])
            state = _masked(new_state, state, mask)
    return cell.output(state)


class Recurrent:
    """Unidirectional recurrent layer returning the final hidden state."""

    def __init__(self, cell):
        self.cell = cell

    def forward(self, embedded: Tensor, lengths: np.ndarray | None = None) -> Tensor:
        return run_recurrent(self.cell, embedded, lengths)

    def params(self, prefix: str):
        return self.cell.params(f"{prefix}.cell")


class Bidirectional:
    """Two passes with separate parameters; final states concatenated to 2*hidden."""

    def __init__(self, forward_cell, backward_cell):
        self.forward_cell = forward_cell
        self.backward_cell = backward_cell

    def forward(self, embedded: Tensor, lengths: np.ndarray | None = None) -> Tensor:
        h_fw = run_recurrent(self.forward_cell, embedded, lengths, reverse=False)
        h_bw = run_recurrent(self.backward_cell, embedded, lengths, reverse=True)
        return ag.concat([h_fw, h_bw], axis=1)

    def params(self, prefix: str):
        return self.forward_cell.params(f"{prefix}.fw") + self.backward_cell.params(f"{prefix}.bw")
