"""Reverse-mode automatic differentiation over dense float64 arrays.

Nodes form a DAG as operations execute; ``backward`` walks the graph in
reverse topological order and accumulates exact adjoints. All payloads are
numpy float64 arrays (scalars are 0-d arrays). Log-space code is allowed to
produce -inf (the log of a zero probability); NaN and +inf are never legal
and trip the debug finiteness check.
"""

from __future__ import annotations

import contextlib
import os

import numpy as np

_GRAD_ENABLED = True
_DEBUG_FINITE = bool(os.environ.get("SEGLM_DEBUG_FINITE"))


def set_debug_checks(enabled: bool) -> None:
    """Toggle the NaN/+inf tripwire run after every operation."""
    global _DEBUG_FINITE
    _DEBUG_FINITE = enabled


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (pure evaluation)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED


class Node:
    """One recorded value: payload array, parents, and the local vjp."""

    __slots__ = ("data", "grad", "parents", "vjp", "name", "is_leaf")

    def __init__(self, data, parents=(), vjp=None, name=None, is_leaf=False):
        self.data = data
        self.grad = None
        self.parents = parents
        self.vjp = vjp
        self.name = name
        self.is_leaf = is_leaf

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        tag = f" {self.name}" if self.name else ""
        return f"Node{tag}(shape={self.data.shape})"

    # Small operator sugar; heavy lifting stays in the module functions.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(constant(other), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)


def _asarray(x):
    return np.asarray(x, dtype=np.float64)


def _check(data):
    if _DEBUG_FINITE:
        arr = np.asarray(data)
        if np.isnan(arr).any() or np.isposinf(arr).any():
            raise FloatingPointError("NaN or +inf produced by an operation")
    return data


def leaf(data, name=None) -> Node:
    """A differentiable input (parameter). Gradients accumulate here."""
    return Node(_asarray(data), name=name, is_leaf=True)


def constant(data) -> Node:
    """A non-differentiable input."""
    if isinstance(data, Node):
        return data
    return Node(_asarray(data))


def _make(data, parents, vjp, name=None) -> Node:
    _check(data)
    if not _GRAD_ENABLED:
        return Node(data)
    return Node(data, parents=parents, vjp=vjp, name=name)


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# --------------------------------------------------------------------------
# primitives


def add(a, b) -> Node:
    a, b = constant(a), constant(b)
    out = a.data + b.data

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _make(out, (a, b), vjp)


def sub(a, b) -> Node:
    a, b = constant(a), constant(b)
    out = a.data - b.data

    def vjp(g):
        return _unbroadcast(g, a.data.shape), -_unbroadcast(g, b.data.shape)

    return _make(out, (a, b), vjp)


def mul(a, b) -> Node:
    a, b = constant(a), constant(b)
    out = a.data * b.data

    def vjp(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return _make(out, (a, b), vjp)


def neg(a) -> Node:
    a = constant(a)
    return _make(-a.data, (a,), lambda g: (-g,))


def matmul(a, b) -> Node:
    """2-d @ 2-d matrix product."""
    a, b = constant(a), constant(b)
    out = a.data @ b.data

    def vjp(g):
        return g @ b.data.T, a.data.T @ g

    return _make(out, (a, b), vjp)


def sigmoid(a) -> Node:
    a = constant(a)
    out = np.empty_like(a.data)
    pos = a.data >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
    ez = np.exp(a.data[~pos])
    out[~pos] = ez / (1.0 + ez)

    def vjp(g):
        return (g * out * (1.0 - out),)

    return _make(out, (a,), vjp)


def tanh(a) -> Node:
    a = constant(a)
    out = np.tanh(a.data)

    def vjp(g):
        return (g * (1.0 - out * out),)

    return _make(out, (a,), vjp)


def exp(a) -> Node:
    a = constant(a)
    out = np.exp(a.data)

    def vjp(g):
        return (g * out,)

    return _make(out, (a,), vjp)


def log(a) -> Node:
    a = constant(a)
    with np.errstate(divide="ignore"):
        out = np.log(a.data)

    def vjp(g):
        return (g / a.data,)

    return _make(out, (a,), vjp)


def softplus(a) -> Node:
    """log(1 + e^a), stable over the full float range."""
    a = constant(a)
    out = np.logaddexp(0.0, a.data)

    def vjp(g):
        pos = a.data >= 0
        s = np.empty_like(a.data)
        s[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
        ez = np.exp(a.data[~pos])
        s[~pos] = ez / (1.0 + ez)
        return (g * s,)

    return _make(out, (a,), vjp)


def logaddexp(a, b) -> Node:
    """Elementwise log(e^a + e^b); -inf inputs contribute zero weight."""
    a, b = constant(a), constant(b)
    out = np.logaddexp(a.data, b.data)

    def vjp(g):
        dead = np.isneginf(out)
        with np.errstate(invalid="ignore"):
            wa = np.where(dead, 0.0, np.exp(a.data - out))
            wb = np.where(dead, 0.0, np.exp(b.data - out))
        return (
            _unbroadcast(g * wa, a.data.shape),
            _unbroadcast(g * wb, b.data.shape),
        )

    return _make(out, (a, b), vjp)


def logsumexp(a, axis=-1) -> Node:
    """log sum exp along one axis; tolerates -inf entries."""
    a = constant(a)
    m = np.max(a.data, axis=axis, keepdims=True)
    m = np.where(np.isneginf(m), 0.0, m)
    out = np.squeeze(m, axis) + np.log(
        np.sum(np.exp(a.data - m), axis=axis)
    )

    def vjp(g):
        with np.errstate(invalid="ignore"):
            w = np.exp(a.data - np.expand_dims(out, axis))
        w = np.where(np.isnan(w), 0.0, w)
        return (np.expand_dims(g, axis) * w,)

    return _make(out, (a,), vjp)


def log_softmax(a, axis=-1) -> Node:
    """Max-shifted log softmax; masked (-inf) logits get exactly -inf."""
    a = constant(a)
    m = np.max(a.data, axis=axis, keepdims=True)
    m = np.where(np.isneginf(m), 0.0, m)
    shifted = a.data - m
    lz = np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))
    out = shifted - lz

    def vjp(g):
        p = np.exp(out)
        return (g - p * np.sum(g, axis=axis, keepdims=True),)

    return _make(out, (a,), vjp)


def sum_all(a) -> Node:
    a = constant(a)
    out = np.asarray(a.data.sum())

    def vjp(g):
        return (np.broadcast_to(g, a.data.shape).copy(),)

    return _make(out, (a,), vjp)


def concat(nodes, axis=0) -> Node:
    nodes = [constant(n) for n in nodes]
    out = np.concatenate([n.data for n in nodes], axis=axis)
    sizes = [n.data.shape[axis] for n in nodes]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        return tuple(
            np.take(g, range(offsets[i], offsets[i + 1]), axis=axis)
            for i in range(len(nodes))
        )

    return _make(out, tuple(nodes), vjp)


def stack(nodes) -> Node:
    """Stack equal-shaped nodes along a new leading axis."""
    nodes = [constant(n) for n in nodes]
    out = np.stack([n.data for n in nodes])

    def vjp(g):
        return tuple(g[i] for i in range(len(nodes)))

    return _make(out, tuple(nodes), vjp)


def rows(a, idx) -> Node:
    """Select rows a[idx] (embedding lookup); adjoint scatter-adds."""
    a = constant(a)
    idx = np.asarray(idx, dtype=np.intp)
    out = a.data[idx]

    def vjp(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        return (full,)

    return _make(out, (a,), vjp)


def gather_pairs(a, row_idx, col_idx) -> Node:
    """Select a[row_idx, col_idx] elementwise from a 2-d node."""
    a = constant(a)
    row_idx = np.asarray(row_idx, dtype=np.intp)
    col_idx = np.asarray(col_idx, dtype=np.intp)
    out = a.data[row_idx, col_idx]

    def vjp(g):
        full = np.zeros_like(a.data)
        np.add.at(full, (row_idx, col_idx), g)
        return (full,)

    return _make(out, (a,), vjp)


def take(a, index) -> Node:
    """One scalar a[index] as a 0-d node."""
    a = constant(a)
    out = np.asarray(a.data[index])

    def vjp(g):
        full = np.zeros_like(a.data)
        full[index] = g
        return (full,)

    return _make(out, (a,), vjp)


def scatter_to_full(values, idx, size, fill=-np.inf) -> Node:
    """Place ``values`` at positions ``idx`` of a fill-valued vector.

    The fill entries are constants; gradients flow only through ``values``.
    """
    values = constant(values)
    idx = np.asarray(idx, dtype=np.intp)
    out = np.full(size, fill, dtype=np.float64)
    out[idx] = values.data

    def vjp(g):
        return (g[idx],)

    return _make(out, (values,), vjp)


def reshape(a, shape) -> Node:
    a = constant(a)
    out = a.data.reshape(shape)

    def vjp(g):
        return (g.reshape(a.data.shape),)

    return _make(out, (a,), vjp)


def transpose(a) -> Node:
    a = constant(a)

    def vjp(g):
        return (g.T,)

    return _make(a.data.T, (a,), vjp)


def split_cols(a, k):
    """Split a (..., k*m) node into k equal column blocks."""
    a = constant(a)
    m = a.data.shape[-1] // k
    pieces = []
    for i in range(k):
        sl = slice(i * m, (i + 1) * m)

        def vjp(g, sl=sl):
            full = np.zeros_like(a.data)
            full[..., sl] = g
            return (full,)

        pieces.append(_make(a.data[..., sl], (a,), vjp))
    return pieces


# --------------------------------------------------------------------------
# backward pass


def backward(loss: Node) -> None:
    """Accumulate d(loss)/d(node) into ``.grad`` of every reachable node.

    ``loss`` must be scalar. Visits each node exactly once in reverse
    topological order; leaves keep their accumulated adjoints until the
    caller clears them.
    """
    if loss.data.shape != ():
        raise ValueError(f"loss must be scalar, got shape {loss.data.shape}")

    order = []
    seen = {id(loss)}
    stack_ = [(loss, iter(loss.parents))]
    while stack_:
        node, it = stack_[-1]
        advanced = False
        for parent in it:
            if id(parent) not in seen and parent.parents:
                seen.add(id(parent))
                stack_.append((parent, iter(parent.parents)))
                advanced = True
                break
            seen.add(id(parent))
        if not advanced:
            order.append(node)
            stack_.pop()

    grads = {id(loss): np.asarray(1.0)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None or node.vjp is None:
            continue
        for parent, pg in zip(node.parents, node.vjp(g)):
            if parent.is_leaf:
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.data)
                parent.grad += pg
            elif parent.vjp is not None:
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
