"""A minimal reverse-mode differentiation engine over NumPy arrays.

Only the operations the losses and the recurrent network need are provided.
Each :class:`Tensor` records its parents and a closure that pushes the output
gradient back to them; :meth:`Tensor.backward` walks the graph in reverse
topological order. Broadcasting follows NumPy and is undone on the way back.

    >>> x = Tensor([1.0, 2.0], requires_grad=True)
    >>> y = (x * x).sum()
    >>> y.backward()
    >>> x.grad
    array([2., 4.])
"""

from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")
    __array_priority__ = 1000

    def __init__(self, data, requires_grad=False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in parents)
        self._parents = tuple(parents) if self.requires_grad else ()
        self._backward = backward if self.requires_grad else None

    def __repr__(self):
        return f"Tensor({self.data!r}, requires_grad={self.requires_grad})"

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self):
        return self.data

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        if not self.requires_grad:
            return
        order = _topological_order(self)
        self.grad = np.ones_like(self.data) if grad is None else np.asarray(grad, dtype=np.float64)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 else shape)


def _topological_order(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _accumulate(t, g):
    if not t.requires_grad:
        return
    g = _unbroadcast(g, t.data.shape)
    t.grad = g if t.grad is None else t.grad + g


# --------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        _accumulate(a, g)
        _accumulate(b, g)

    return Tensor(a.data + b.data, parents=(a, b), backward=backward)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        _accumulate(a, g)
        _accumulate(b, -g)

    return Tensor(a.data - b.data, parents=(a, b), backward=backward)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        _accumulate(a, g * b.data)
        _accumulate(b, g * a.data)

    return Tensor(a.data * b.data, parents=(a, b), backward=backward)


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data

    def backward(g):
        _accumulate(a, g / b.data)
        _accumulate(b, -g * out / b.data)

    return Tensor(out, parents=(a, b), backward=backward)


def power(a, exponent):
    a = as_tensor(a)
    p = float(exponent)

    def backward(g):
        _accumulate(a, g * p * a.data ** (p - 1.0))

    return Tensor(a.data**p, parents=(a,), backward=backward)


def _unary(a, value, derivative):
    """Elementwise op whose derivative is given as an array."""
    a = as_tensor(a)

    def backward(g):
        _accumulate(a, g * derivative)

    return Tensor(value, parents=(a,), backward=backward)


def exp(a):
    a = as_tensor(a)
    out = np.exp(a.data)
    return _unary(a, out, out)


def sqrt(a):
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return _unary(a, out, 0.5 / out)


def tanh(a):
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _unary(a, out, 1.0 - out * out)


def sigmoid(a):
    a = as_tensor(a)
    x = a.data
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _unary(a, out, out * (1.0 - out))


def huber(a, delta=1.0):
    """``0.5 x^2`` for ``|x| <= delta``, else ``delta (|x| - 0.5 delta)``."""
    a = as_tensor(a)
    x = a.data
    inner = np.abs(x) <= delta
    out = np.where(inner, 0.5 * x * x, delta * (np.abs(x) - 0.5 * delta))
    return _unary(a, out, np.where(inner, x, delta * np.sign(x)))


def arccos_sq(a, grad_clamp=1e-7):
    """``arccos(x)**2`` with the argument clamped to [-1, 1].

    The derivative ``-2 arccos(x) / sqrt(1 - x^2)`` is evaluated at ``x``
    clamped to ``[-1 + grad_clamp, 1 - grad_clamp]``.
    """
    a = as_tensor(a)
    theta = np.arccos(np.clip(a.data, -1.0, 1.0))
    xc = np.clip(a.data, -1.0 + grad_clamp, 1.0 - grad_clamp)
    return _unary(a, theta * theta, -2.0 * theta / np.sqrt(1.0 - xc * xc))


def sinc_sq(a):
    """``sin(t)/t`` as a function of ``s = t^2``, smooth at 0."""
    a = as_tensor(a)
    s = a.data
    small = s < 1e-3
    t = np.sqrt(np.where(small, 1.0, s))
    val = np.where(small, 1.0 - s / 6.0 + s * s / 120.0 - s**3 / 5040.0, np.sin(t) / t)
    der = np.where(
        small,
        -1.0 / 6.0 + s / 60.0 - s * s / 1680.0,
        (t * np.cos(t) - np.sin(t)) / (2.0 * t**3),
    )
    return _unary(a, val, der)


def cosc_sq(a):
    """``(1 - cos t)/t^2`` as a function of ``s = t^2``, smooth at 0."""
    a = as_tensor(a)
    s = a.data
    small = s < 1e-3
    t = np.sqrt(np.where(small, 1.0, s))
    val = np.where(small, 0.5 - s / 24.0 + s * s / 720.0 - s**3 / 40320.0, (1.0 - np.cos(t)) / t**2)
    der = np.where(
        small,
        -1.0 / 24.0 + s / 360.0 - s * s / 13440.0,
        (t * np.sin(t) - 2.0 * (1.0 - np.cos(t))) / (2.0 * t**4),
    )
    return _unary(a, val, der)


# --------------------------------------------------------------------------
# reductions and linear algebra


def tsum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.data.shape))

    return Tensor(out, parents=(a,), backward=backward)


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    n = a.data.size if axis is None else np.prod([a.data.shape[i] for i in np.atleast_1d(axis)])
    return tsum(a, axis, keepdims) * (1.0 / n)


def matmul(a, b):
    """Matrix product of two arrays with at least two dimensions."""
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        if a.requires_grad:
            _accumulate(a, g @ np.swapaxes(b.data, -1, -2))
        if b.requires_grad:
            if b.data.ndim == 2:
                k = a.data.shape[-1]
                gb = a.data.reshape(-1, k).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = np.swapaxes(a.data, -1, -2) @ g
            _accumulate(b, gb)

    return Tensor(a.data @ b.data, parents=(a, b), backward=backward)


# --------------------------------------------------------------------------
# shape manipulation


def reshape(a, shape):
    a = as_tensor(a)

    def backward(g):
        _accumulate(a, g.reshape(a.data.shape))

    return Tensor(a.data.reshape(shape), parents=(a,), backward=backward)


def swapaxes(a, ax1, ax2):
    a = as_tensor(a)

    def backward(g):
        _accumulate(a, np.swapaxes(g, ax1, ax2))

    return Tensor(np.swapaxes(a.data, ax1, ax2), parents=(a,), backward=backward)


def expand_dims(a, axis):
    a = as_tensor(a)
    return reshape(a, np.expand_dims(a.data, axis).shape)


def _is_basic_index(index):
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (int, np.integer, slice)) or i is None or i is Ellipsis for i in items)


def getitem(a, index):
    a = as_tensor(a)
    basic = _is_basic_index(index)

    def backward(g):
        full = np.zeros_like(a.data)
        if basic:
            full[index] += g
        else:
            np.add.at(full, index, g)
        _accumulate(a, full)

    return Tensor(a.data[index], parents=(a,), backward=backward)


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        for t, part in zip(tensors, np.split(g, splits, axis=axis)):
            _accumulate(t, part)

    return Tensor(np.concatenate([t.data for t in tensors], axis=axis), parents=tensors, backward=backward)


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]

    def backward(g):
        for i, t in enumerate(tensors):
            _accumulate(t, np.take(g, i, axis=axis))

    return Tensor(np.stack([t.data for t in tensors], axis=axis), parents=tensors, backward=backward)


# --------------------------------------------------------------------------
# composites


def softmax(a, axis=-1):
    a = as_tensor(a)
    # the max shift is a constant: softmax is invariant to it
    shifted = a - np.max(a.data, axis=axis, keepdims=True)
    e = exp(shifted)
    return e / tsum(e, axis=axis, keepdims=True)


def cross(a, b):
    """Cross product along the last axis."""
    a1, a2, a3 = a[..., 0], a[..., 1], a[..., 2]
    b1, b2, b3 = b[..., 0], b[..., 1], b[..., 2]
    return stack([a2 * b3 - a3 * b2, a3 * b1 - a1 * b3, a1 * b2 - a2 * b1], axis=-1)


def norm(a, axis=-1, keepdims=False):
    return sqrt(tsum(a * a, axis=axis, keepdims=keepdims))
