"""Minimal reverse-mode automatic differentiation over numpy arrays.

A :class:`Tensor` records the op graph as it is built; ``backward`` on a
scalar walks the graph once in reverse topological order and accumulates
gradients into leaf tensors that require them.  Everything runs in float64
so analytic gradients can be checked tightly against finite differences.

Only the ops the networks need are implemented; composite ops (softmax,
clip, squared error) are built from primitives so they need no bespoke
backward rules.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Tensor", "constant", "linearized"]


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """A node in the op graph wrapping a float64 ndarray."""

    __slots__ = ("data", "grad", "parents", "vjp", "requires_grad")

    def __init__(self, data, parents=(), vjp=None, requires_grad=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.parents = parents
        self.vjp = vjp
        if requires_grad is None:
            requires_grad = any(p.requires_grad for p in parents)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None

    # -- graph mechanics -----------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every requiring leaf's ``grad``.

        ``self`` must be a scalar.  Repeated calls on the same graph keep
        accumulating, which is what gradient accumulation over minibatches
        wants; call ``zero_grad`` on the parameter store to reset.
        """
        if self.data.size != 1:
            raise ValueError(f"backward needs a scalar, got shape {self.shape}")
        if not self.requires_grad:
            raise RuntimeError("backward on a tensor with no recorded forward graph")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node.parents:
                stack.append((p, False))
        flow: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = flow.pop(id(node), None)
            if g is None:
                continue
            if node.parents:
                for parent, pg in zip(node.parents, node.vjp(g)):
                    if pg is None or not parent.requires_grad:
                        continue
                    pg = _unbroadcast(pg, parent.data.shape)
                    key = id(parent)
                    if key in flow:
                        flow[key] = flow[key] + pg
                    else:
                        flow[key] = pg
            elif node.requires_grad:
                node.grad = g if node.grad is None else node.grad + g

    # -- primitive ops ---------------------------------------------------------

    def __add__(self, other):
        other = _wrap(other)
        return Tensor(
            self.data + other.data,
            (self, other),
            lambda g: (g, g),
        )

    __radd__ = __add__

    def __neg__(self):
        return Tensor(-self.data, (self,), lambda g: (-g,))

    def __sub__(self, other):
        return self + (-_wrap(other))

    def __rsub__(self, other):
        return _wrap(other) + (-self)

    def __mul__(self, other):
        other = _wrap(other)
        return Tensor(
            self.data * other.data,
            (self, other),
            lambda g: (g * other.data, g * self.data),
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _wrap(other)
        return Tensor(
            self.data / other.data,
            (self, other),
            lambda g: (g / other.data, -g * self.data / (other.data * other.data)),
        )

    def __rtruediv__(self, other):
        return _wrap(other) / self

    def __pow__(self, exponent: float):
        if not isinstance(exponent, (int, float)):
            raise TypeError("only constant exponents are supported")
        out = self.data**exponent
        return Tensor(
            out,
            (self,),
            lambda g: (g * exponent * self.data ** (exponent - 1),),
        )

    def __matmul__(self, other):
        other = _wrap(other)

        def vjp(g):
            ga = g @ np.swapaxes(other.data, -1, -2)
            gb = np.swapaxes(self.data, -1, -2) @ g
            return ga, gb

        return Tensor(self.data @ other.data, (self, other), vjp)

    def exp(self):
        out = np.exp(self.data)
        return Tensor(out, (self,), lambda g: (g * out,))

    def log(self):
        return Tensor(np.log(self.data), (self,), lambda g: (g / self.data,))

    def tanh(self):
        out = np.tanh(self.data)
        return Tensor(out, (self,), lambda g: (g * (1.0 - out * out),))

    def relu(self):
        mask = self.data > 0.0
        return Tensor(self.data * mask, (self,), lambda g: (g * mask,))

    def softplus(self):
        x = self.data
        out = np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)
        sig = 1.0 / (1.0 + np.exp(-x))
        return Tensor(out, (self,), lambda g: (g * sig,))

    def sum(self, axis=None, keepdims: bool = False):
        out = self.data.sum(axis=axis, keepdims=keepdims)

        def vjp(g):
            g = np.asarray(g)
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, self.data.shape).copy(),)

        return Tensor(out, (self,), vjp)

    def mean(self, axis=None, keepdims: bool = False):
        if axis is None:
            count = self.data.size
        else:
            count = self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def reshape(self, *shape):
        old = self.data.shape
        return Tensor(
            self.data.reshape(*shape), (self,), lambda g: (g.reshape(old),)
        )

    def transpose(self, axes: tuple[int, ...]):
        inverse = np.argsort(axes)
        return Tensor(
            self.data.transpose(axes),
            (self,),
            lambda g: (g.transpose(inverse),),
        )

    def take(self, indices, axis: int):
        """Gather along ``axis``; repeated indices accumulate on backward."""
        indices = np.asarray(indices)
        out = np.take(self.data, indices, axis=axis)

        def vjp(g):
            full = np.zeros_like(self.data)
            np.add.at(full, (slice(None),) * axis + (indices,), g)
            return (full,)

        return Tensor(out, (self,), vjp)

    def pad(self, axis: int, before: int, after: int):
        widths = [(0, 0)] * self.data.ndim
        widths[axis] = (before, after)
        out = np.pad(self.data, widths)
        index = [slice(None)] * self.data.ndim
        index[axis] = slice(before, before + self.data.shape[axis])
        index = tuple(index)
        return Tensor(out, (self,), lambda g: (g[index],))

    def maximum(self, other):
        other = _wrap(other)
        mask = self.data >= other.data
        return Tensor(
            np.maximum(self.data, other.data),
            (self, other),
            lambda g: (g * mask, g * ~mask),
        )

    def minimum(self, other):
        other = _wrap(other)
        mask = self.data <= other.data
        return Tensor(
            np.minimum(self.data, other.data),
            (self, other),
            lambda g: (g * mask, g * ~mask),
        )

    # -- composite ops -------------------------------------------------------

    def softmax(self, axis: int = -1):
        shifted = self - self.data.max(axis=axis, keepdims=True)
        e = shifted.exp()
        return e / e.sum(axis=axis, keepdims=True)

    def clip(self, lo: float, hi: float):
        return self.maximum(lo).minimum(hi)

    def square(self):
        return self * self


def _wrap(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=np.float64), requires_grad=False)


def constant(value) -> Tensor:
    """A graph leaf that never receives gradients."""
    return _wrap(value)


def concat(tensors: list[Tensor], axis: int) -> Tensor:
    datas = [t.data for t in tensors]
    out = np.concatenate(datas, axis=axis)
    sizes = [d.shape[axis] for d in datas]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        grads = []
        for i in range(len(datas)):
            index = [slice(None)] * g.ndim
            index[axis] = slice(offsets[i], offsets[i + 1])
            grads.append(g[tuple(index)])
        return tuple(grads)

    return Tensor(out, tuple(tensors), vjp)


def linearized(value: np.ndarray, inputs: list[Tensor], local_grads: list[np.ndarray]) -> Tensor:
    """A node with an externally computed value and exact local Jacobians.

    Used at the network/distribution boundary: distribution log-probs and
    entropies are computed in closed form outside the graph, then chained
    into it with their analytic d/d(mu) and d/d(sigma), which must be
    elementwise (same shape as ``value``).
    """
    grads = [np.asarray(g, dtype=np.float64) for g in local_grads]

    def vjp(g):
        return tuple(g * lg for lg in grads)

    return Tensor(value, tuple(inputs), vjp)
