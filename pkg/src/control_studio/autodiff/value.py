"""Reverse-mode differentiation on numpy arrays.

A ``Value`` wraps an ndarray together with the record of the operation that
produced it. Calling :func:`backward` on a scalar loss walks the graph in
reverse topological order and fills every reachable node's ``grad`` with
d(loss)/d(node). Gradients from shared subexpressions accumulate additively.

Only the primitives the prosody models need are provided; there is no
general broadcasting beyond what those call sites require.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Value",
    "ShapeError",
    "const",
    "matmul",
    "add",
    "mul",
    "scale",
    "concat",
    "stack_rows",
    "tanh",
    "sigmoid",
    "relu",
    "exp",
    "softmax",
    "sum_all",
    "sum_axis",
    "mse",
    "repeat_rows",
    "reshape",
    "sliced",
    "backward",
]


class ShapeError(ValueError):
    """Operand shapes do not conform for the requested primitive."""


class Value:
    """One node of the differentiation graph.

    ``data`` holds the forward result, ``grad`` is populated by
    :func:`backward`, and ``_parents``/``_backprop`` record provenance.
    """

    __slots__ = ("data", "grad", "_parents", "_backprop")

    def __init__(self, data, parents=(), backprop=None):
        if not isinstance(data, np.ndarray):
            data = np.asarray(data, dtype=np.float64)
        self.data = data
        self.grad = None
        self._parents = parents
        self._backprop = backprop

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Value(shape={self.data.shape})"

    # Small operator sugar; everything maps onto the module-level primitives.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def __sub__(self, other):
        return add(self, scale(_wrap(other), -1.0))

    def __rsub__(self, other):
        return add(_wrap(other), scale(self, -1.0))

    def __getitem__(self, key):
        return sliced(self, key)


def const(x) -> Value:
    """A leaf node that participates in the graph but is not a parameter."""
    return Value(np.asarray(x, dtype=np.float64))


def _wrap(x) -> Value:
    return x if isinstance(x, Value) else const(x)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def matmul(a, b) -> Value:
    a, b = _wrap(a), _wrap(b)
    if a.data.ndim not in (1, 2) or b.data.ndim not in (1, 2):
        raise ShapeError(f"matmul expects 1-D or 2-D operands, got {a.shape} and {b.shape}")
    if a.data.shape[-1] != b.data.shape[0]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} vs {b.shape}")
    out_data = a.data @ b.data

    def backprop(out):
        g = out.grad
        ad, bd = a.data, b.data
        if ad.ndim == 1 and bd.ndim == 1:  # dot -> scalar
            a.grad += g * bd
            b.grad += g * ad
        elif ad.ndim == 2 and bd.ndim == 2:
            a.grad += g @ bd.T
            b.grad += ad.T @ g
        elif ad.ndim == 2 and bd.ndim == 1:  # (m,n)@(n,) -> (m,)
            a.grad += np.outer(g, bd)
            b.grad += ad.T @ g
        else:  # (n,)@(n,m) -> (m,)
            a.grad += bd @ g
            b.grad += np.outer(ad, g)

    return Value(out_data, (a, b), backprop)


def add(a, b) -> Value:
    a, b = _wrap(a), _wrap(b)
    try:
        out_data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add operands do not broadcast: {a.shape} vs {b.shape}") from None

    def backprop(out):
        a.grad += _unbroadcast(out.grad, a.data.shape)
        b.grad += _unbroadcast(out.grad, b.data.shape)

    return Value(out_data, (a, b), backprop)


def mul(a, b) -> Value:
    a, b = _wrap(a), _wrap(b)
    try:
        out_data = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul operands do not broadcast: {a.shape} vs {b.shape}") from None

    def backprop(out):
        a.grad += _unbroadcast(out.grad * b.data, a.data.shape)
        b.grad += _unbroadcast(out.grad * a.data, b.data.shape)

    return Value(out_data, (a, b), backprop)


def scale(a, s: float) -> Value:
    a = _wrap(a)
    s = float(s)

    def backprop(out):
        a.grad += out.grad * s

    return Value(a.data * s, (a,), backprop)


def concat(values, axis: int = 0) -> Value:
    values = [_wrap(v) for v in values]
    if not values:
        raise ShapeError("concat of an empty list")
    out_data = np.concatenate([v.data for v in values], axis=axis)
    sizes = [v.data.shape[axis] for v in values]
    offsets = np.cumsum([0] + sizes)

    def backprop(out):
        for v, lo, hi in zip(values, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * out.grad.ndim
            idx[axis] = slice(lo, hi)
            v.grad += out.grad[tuple(idx)]

    return Value(out_data, tuple(values), backprop)


def stack_rows(values) -> Value:
    """Stack 1-D values of equal length into a 2-D matrix, one per row."""
    values = [_wrap(v) for v in values]
    if not values:
        raise ShapeError("stack_rows of an empty list")
    out_data = np.stack([v.data for v in values], axis=0)

    def backprop(out):
        for i, v in enumerate(values):
            v.grad += out.grad[i]

    return Value(out_data, tuple(values), backprop)


def tanh(a) -> Value:
    a = _wrap(a)
    out_data = np.tanh(a.data)

    def backprop(out):
        a.grad += out.grad * (1.0 - out.data * out.data)

    return Value(out_data, (a,), backprop)


def sigmoid(a) -> Value:
    a = _wrap(a)
    out_data = 1.0 / (1.0 + np.exp(-a.data))

    def backprop(out):
        a.grad += out.grad * out.data * (1.0 - out.data)

    return Value(out_data, (a,), backprop)


def relu(a) -> Value:
    a = _wrap(a)
    out_data = np.maximum(a.data, 0.0)

    def backprop(out):
        a.grad += out.grad * (a.data > 0.0)

    return Value(out_data, (a,), backprop)


def exp(a) -> Value:
    a = _wrap(a)
    out_data = np.exp(a.data)

    def backprop(out):
        a.grad += out.grad * out.data

    return Value(out_data, (a,), backprop)


def softmax(a, axis: int = -1) -> Value:
    """Numerically stable softmax along ``axis`` (max subtracted)."""
    a = _wrap(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def backprop(out):
        s = out.data
        dot = (out.grad * s).sum(axis=axis, keepdims=True)
        a.grad += s * (out.grad - dot)

    return Value(out_data, (a,), backprop)


def sum_all(a) -> Value:
    a = _wrap(a)
    out_data = np.asarray(a.data.sum())

    def backprop(out):
        a.grad += out.grad * np.ones_like(a.data)

    return Value(out_data, (a,), backprop)


def sum_axis(a, axis: int) -> Value:
    a = _wrap(a)
    out_data = a.data.sum(axis=axis)

    def backprop(out):
        a.grad += np.expand_dims(out.grad, axis)

    return Value(out_data, (a,), backprop)


def mse(pred, target) -> Value:
    """Mean squared error over all elements; target may be a plain array."""
    pred, target = _wrap(pred), _wrap(target)
    if pred.data.shape != target.data.shape:
        raise ShapeError(f"mse operands differ in shape: {pred.shape} vs {target.shape}")
    diff = pred.data - target.data
    n = diff.size
    out_data = np.asarray((diff * diff).sum() / n)

    def backprop(out):
        g = out.grad * (2.0 / n) * diff
        pred.grad += g
        target.grad -= g

    return Value(out_data, (pred, target), backprop)


def repeat_rows(a, t: int) -> Value:
    """Tile a 1-D value into t identical rows (upsampling to phone level)."""
    a = _wrap(a)
    if a.data.ndim != 1:
        raise ShapeError(f"repeat_rows expects a vector, got shape {a.shape}")
    out_data = np.tile(a.data, (t, 1))

    def backprop(out):
        a.grad += out.grad.sum(axis=0)

    return Value(out_data, (a,), backprop)


def reshape(a, shape) -> Value:
    a = _wrap(a)
    out_data = a.data.reshape(shape)

    def backprop(out):
        a.grad += out.grad.reshape(a.data.shape)

    return Value(out_data, (a,), backprop)


def sliced(a, key) -> Value:
    a = _wrap(a)
    out_data = a.data[key]

    def backprop(out):
        a.grad[key] += out.grad

    return Value(out_data, (a,), backprop)


def _topo_order(root: Value) -> list:
    """Iterative post-order over parents; deep graphs must not hit the
    recursion limit."""
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Value) -> None:
    """Populate ``grad`` on every node reachable from ``loss``.

    Nodes without a grad buffer get one initialised to zeros; nodes that
    already carry one (parameters mid-batch) accumulate into it. Callers
    zero parameter grads between optimisation steps.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    order = _topo_order(loss)
    for node in order:
        if node.grad is None:
            node.grad = np.zeros_like(node.data)
    loss.grad = loss.grad + np.ones_like(loss.data)
    for node in reversed(order):
        if node._backprop is not None:
            node._backprop(node)
