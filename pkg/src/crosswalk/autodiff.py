"""Tiny reverse-mode autodiff over numpy arrays.

Covers exactly what dense policy/value networks and their losses need:
matmul, broadcasting arithmetic, tanh/exp/log, reductions, elementwise
minimum and clipping, and concatenation. Build a graph by operating on
`Tensor`s, call `.backward()` on a scalar, read `.grad` off the leaves.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the original operand shape."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("value", "grad", "_parents", "_backward")

    def __init__(self, value, parents=(), backward=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.value.shape

    def _acc(self, g):
        self.grad = g if self.grad is None else self.grad + g

    def backward(self):
        if self.value.size != 1:
            raise ValueError("backward() expects a scalar loss")
        order, seen = [], set()

        def visit(t):
            if id(t) in seen:
                return
            seen.add(id(t))
            for p in t._parents:
                visit(p)
            order.append(t)

        visit(self)
        self._acc(np.ones_like(self.value))
        for t in reversed(order):
            if t._backward is not None and t.grad is not None:
                t._backward(t.grad)

    # ------------------------------------------------------------ arithmetic

    def __add__(self, other):
        other = as_tensor(other)

        def bwd(g):
            self._acc(_unbroadcast(g, self.value.shape))
            other._acc(_unbroadcast(g, other.value.shape))

        return Tensor(self.value + other.value, (self, other), bwd)

    __radd__ = __add__

    def __neg__(self):
        def bwd(g):
            self._acc(-g)

        return Tensor(-self.value, (self,), bwd)

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        other = as_tensor(other)

        def bwd(g):
            self._acc(_unbroadcast(g * other.value, self.value.shape))
            other._acc(_unbroadcast(g * self.value, other.value.shape))

        return Tensor(self.value * other.value, (self, other), bwd)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)

        def bwd(g):
            self._acc(_unbroadcast(g / other.value, self.value.shape))
            other._acc(_unbroadcast(-g * self.value / other.value**2,
                                    other.value.shape))

        return Tensor(self.value / other.value, (self, other), bwd)

    def __matmul__(self, other):
        other = as_tensor(other)

        def bwd(g):
            self._acc(g @ other.value.T)
            other._acc(self.value.T @ g)

        return Tensor(self.value @ other.value, (self, other), bwd)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def tanh(x: Tensor) -> Tensor:
    out_val = np.tanh(x.value)

    def bwd(g):
        x._acc(g * (1.0 - out_val * out_val))

    return Tensor(out_val, (x,), bwd)


def exp(x: Tensor) -> Tensor:
    out_val = np.exp(x.value)

    def bwd(g):
        x._acc(g * out_val)

    return Tensor(out_val, (x,), bwd)


def log(x: Tensor) -> Tensor:
    def bwd(g):
        x._acc(g / x.value)

    return Tensor(np.log(x.value), (x,), bwd)


def square(x: Tensor) -> Tensor:
    def bwd(g):
        x._acc(g * 2.0 * x.value)

    return Tensor(x.value * x.value, (x,), bwd)


def total(x: Tensor) -> Tensor:
    """Sum of all elements."""
    def bwd(g):
        x._acc(np.full_like(x.value, float(g)))

    return Tensor(x.value.sum(), (x,), bwd)


def mean(x: Tensor) -> Tensor:
    n = x.value.size

    def bwd(g):
        x._acc(np.full_like(x.value, float(g) / n))

    return Tensor(x.value.mean(), (x,), bwd)


def sum_axis(x: Tensor, axis: int) -> Tensor:
    def bwd(g):
        x._acc(np.broadcast_to(np.expand_dims(g, axis), x.value.shape).copy())

    return Tensor(x.value.sum(axis=axis), (x,), bwd)


def minimum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise min; gradient follows the smaller branch (ties to `a`)."""
    a, b = as_tensor(a), as_tensor(b)
    take_a = a.value <= b.value

    def bwd(g):
        a._acc(_unbroadcast(g * take_a, a.value.shape))
        b._acc(_unbroadcast(g * ~take_a, b.value.shape))

    return Tensor(np.minimum(a.value, b.value), (a, b), bwd)


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp with pass-through gradient inside the interval, zero outside."""
    inside = (x.value >= lo) & (x.value <= hi)

    def bwd(g):
        x._acc(g * inside)

    return Tensor(np.clip(x.value, lo, hi), (x,), bwd)


def concat(tensors, axis: int = 1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.value.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            t._acc(g[tuple(idx)])

    return Tensor(np.concatenate([t.value for t in tensors], axis=axis),
                  tuple(tensors), bwd)
