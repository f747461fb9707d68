"""Network building blocks: parameter store, linear/conv/attention layers."""

from __future__ import annotations

import math

import numpy as np

from .autodiff import Tensor, concat

__all__ = [
    "ParameterStore",
    "Linear",
    "Conv1d",
    "MultiHeadSelfAttention",
    "AttentivePool",
    "EncoderBlock",
]


def _orthogonal(rng: np.random.Generator, shape: tuple[int, int], gain: float) -> np.ndarray:
    a = rng.standard_normal(shape)
    q, r = np.linalg.qr(a if shape[0] >= shape[1] else a.T)
    q = q * np.sign(np.diag(r))
    if shape[0] < shape[1]:
        q = q.T
    return gain * q[: shape[0], : shape[1]]


class ParameterStore:
    """Named parameter tensors with deterministic seeded initialization.

    Creation order is fixed by network construction, so the flat vector
    layout is stable and checkpoints round-trip bit exactly.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._rng = np.random.default_rng(seed)
        self._params: dict[str, Tensor] = {}

    def create(self, name: str, shape: tuple[int, ...], init: str, gain: float = 1.0) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        if init == "zeros":
            data = np.zeros(shape)
        elif init == "fanin":
            fan_in = shape[0] if len(shape) == 2 else int(np.prod(shape[:-1]))
            data = self._rng.standard_normal(shape) * (gain / math.sqrt(max(fan_in, 1)))
        elif init == "orthogonal":
            if len(shape) != 2:
                raise ValueError("orthogonal init needs a 2-d shape")
            data = _orthogonal(self._rng, shape, gain)
        elif init == "const":
            data = np.full(shape, gain)
        else:
            raise ValueError(f"unknown init {init!r}")
        t = Tensor(data, requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    @property
    def n_params(self) -> int:
        return sum(p.data.size for p in self._params.values())

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad = None

    def flat(self) -> np.ndarray:
        return np.concatenate([p.data.ravel() for p in self._params.values()])

    def set_flat(self, vec: np.ndarray) -> None:
        offset = 0
        for p in self._params.values():
            size = p.data.size
            p.data = vec[offset : offset + size].reshape(p.data.shape).astype(np.float64)
            offset += size
        if offset != vec.size:
            raise ValueError(f"flat vector size {vec.size} != parameter count {offset}")

    def flat_grad(self) -> np.ndarray:
        chunks = []
        for p in self._params.values():
            if p.grad is None:
                chunks.append(np.zeros(p.data.size))
            else:
                chunks.append(p.grad.ravel())
        return np.concatenate(chunks)

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self._params.items()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for name, data in snap.items():
            self._params[name].data = data.copy()


class Linear:
    def __init__(self, store: ParameterStore, name: str, n_in: int, n_out: int,
                 init: str = "fanin", gain: float = 1.0, bias_value: float = 0.0):
        self.weight = store.create(f"{name}.weight", (n_in, n_out), init, gain)
        self.bias = store.create(f"{name}.bias", (n_out,), "const", bias_value)

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.weight + self.bias


class Conv1d:
    """Strided 1-d convolution over (batch, length, channels) inputs.

    Zero-pads so the output length is exactly ``length // stride``; the
    input length must be divisible by the stride.
    """

    def __init__(self, store: ParameterStore, name: str, n_in: int, n_out: int,
                 kernel: int, stride: int):
        self.kernel = kernel
        self.stride = stride
        self.n_in = n_in
        self.n_out = n_out
        self.weight = store.create(f"{name}.weight", (kernel, n_in, n_out), "fanin")
        self.bias = store.create(f"{name}.bias", (n_out,), "const", 0.0)

    def __call__(self, x: Tensor) -> Tensor:
        length = x.shape[1]
        if length % self.stride:
            raise ValueError(f"length {length} not divisible by stride {self.stride}")
        out_len = length // self.stride
        pad_total = max((out_len - 1) * self.stride + self.kernel - length, 0)
        before = pad_total // 2
        xp = x.pad(axis=1, before=before, after=pad_total - before)
        base = np.arange(out_len) * self.stride
        out = None
        for j in range(self.kernel):
            w_j = self.weight.take(np.array([j]), axis=0).reshape(self.n_in, self.n_out)
            term = xp.take(base + j, axis=1) @ w_j
            out = term if out is None else out + term
        return out + self.bias


class MultiHeadSelfAttention:
    """Standard scaled dot-product self-attention over (B, L, C)."""

    def __init__(self, store: ParameterStore, name: str, channels: int, heads: int):
        if channels % heads:
            raise ValueError(f"channels {channels} not divisible by heads {heads}")
        self.heads = heads
        self.channels = channels
        self.head_dim = channels // heads
        self.q = Linear(store, f"{name}.q", channels, channels)
        self.k = Linear(store, f"{name}.k", channels, channels)
        self.v = Linear(store, f"{name}.v", channels, channels)
        self.out = Linear(store, f"{name}.out", channels, channels)

    def _split(self, x: Tensor, batch: int, length: int) -> Tensor:
        return x.reshape(batch, length, self.heads, self.head_dim).transpose((0, 2, 1, 3))

    def __call__(self, x: Tensor) -> Tensor:
        batch, length, _ = x.shape
        q = self._split(self.q(x), batch, length)
        k = self._split(self.k(x), batch, length)
        v = self._split(self.v(x), batch, length)
        scores = (q @ k.transpose((0, 1, 3, 2))) * (1.0 / math.sqrt(self.head_dim))
        attn = scores.softmax(axis=-1)
        mixed = (attn @ v).transpose((0, 2, 1, 3)).reshape(batch, length, self.channels)
        return self.out(mixed)


class AttentivePool:
    """Learned softmax pooling over the time axis of (B, L, C)."""

    def __init__(self, store: ParameterStore, name: str, channels: int, hidden: int):
        self.score1 = Linear(store, f"{name}.score1", channels, hidden)
        self.score2 = Linear(store, f"{name}.score2", hidden, 1)

    def __call__(self, x: Tensor) -> Tensor:
        scores = self.score2(self.score1(x).tanh())  # (B, L, 1)
        weights = scores.softmax(axis=1)
        return (weights * x).sum(axis=1)


class EncoderBlock:
    """Residual strided conv (temporal patterns, shorter sequence) followed
    by residual multi-head self-attention (cross-step correlation)."""

    def __init__(self, store: ParameterStore, name: str, n_in: int, n_out: int,
                 kernel: int, stride: int, heads: int):
        self.conv = Conv1d(store, f"{name}.conv", n_in, n_out, kernel, stride)
        self.shortcut = Conv1d(store, f"{name}.shortcut", n_in, n_out, 1, stride)
        self.attn = MultiHeadSelfAttention(store, f"{name}.attn", n_out, heads)

    def __call__(self, x: Tensor) -> Tensor:
        y = self.conv(x).tanh() + self.shortcut(x)
        return self.attn(y) + y


def concat_features(a: Tensor, b: Tensor) -> Tensor:
    return concat([a, b], axis=-1)
