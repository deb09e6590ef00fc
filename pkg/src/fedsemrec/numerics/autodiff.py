"""Reverse-mode autodiff core.

Every op builds a node holding the forward value and a closure that routes the
incoming gradient to its parents. Nodes whose parents all have
``requires_grad=False`` are pruned from the graph, so forward passes through
frozen models record nothing and their parameters can never accumulate grads.

Values are float32 in normal operation; the gradient checker temporarily
swaps parameter storage to float64, and all ops preserve the incoming dtype.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError

REAL = np.float32


class Tensor:
    """Graph node over a dense ndarray."""

    __slots__ = ("value", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, value, requires_grad=False, _parents=(), _vjp=None):
        if isinstance(value, np.ndarray):
            self.value = value
        else:
            self.value = np.asarray(value, dtype=REAL)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._vjp = _vjp

    @property
    def shape(self):
        return self.value.shape

    def item(self) -> float:
        return float(self.value)

    def __add__(self, other):
        return add(self, as_tensor(other, like=self))

    def __radd__(self, other):
        return add(as_tensor(other, like=self), self)

    def __sub__(self, other):
        return sub(self, as_tensor(other, like=self))

    def __rsub__(self, other):
        return sub(as_tensor(other, like=self), self)

    def __mul__(self, other):
        return mul(self, as_tensor(other, like=self))

    def __rmul__(self, other):
        return mul(as_tensor(other, like=self), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, requires_grad={self.requires_grad})"


class Parameter(Tensor):
    """Trainable leaf with a persistent gradient buffer."""

    __slots__ = ("trainable",)

    def __init__(self, value, trainable=True):
        arr = np.ascontiguousarray(value, dtype=REAL)
        super().__init__(arr, requires_grad=trainable)
        self.trainable = trainable
        self.grad = np.zeros_like(arr)

    def zero_grad(self):
        self.grad[...] = 0

    def freeze(self):
        self.trainable = False
        self.requires_grad = False


def as_tensor(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.value.dtype if like is not None else REAL
    return Tensor(np.asarray(x, dtype=dtype))


def _node(value: np.ndarray, parents: tuple, vjp) -> Tensor:
    if any(p.requires_grad for p in parents):
        return Tensor(value, requires_grad=True, _parents=parents, _vjp=vjp)
    return Tensor(value)


def _accum(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.value)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def backward(loss: Tensor):
    """Propagate d(loss)/d(node) from a scalar loss to every reachable leaf."""
    if loss.value.size != 1:
        raise ShapeError(f"backward expects a scalar, got shape {loss.value.shape}")
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.value)
    for node in reversed(topo):
        if node._vjp is not None:
            node._vjp(node.grad)


# ---------------------------------------------------------------------------
# elementwise arithmetic
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.value + b.value

    def vjp(g):
        _accum(a, _unbroadcast(g, a.value.shape))
        _accum(b, _unbroadcast(g, b.value.shape))

    return _node(out, (a, b), vjp)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = a.value - b.value

    def vjp(g):
        _accum(a, _unbroadcast(g, a.value.shape))
        _accum(b, _unbroadcast(-g, b.value.shape))

    return _node(out, (a, b), vjp)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.value * b.value

    def vjp(g):
        _accum(a, _unbroadcast(g * b.value, a.value.shape))
        _accum(b, _unbroadcast(g * a.value, b.value.shape))

    return _node(out, (a, b), vjp)


def neg(a: Tensor) -> Tensor:
    return _node(-a.value, (a,), lambda g: _accum(a, -g))


def powc(a: Tensor, p: float) -> Tensor:
    out = a.value**p

    def vjp(g):
        _accum(a, g * p * a.value ** (p - 1))

    return _node(out, (a,), vjp)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.value)

    def vjp(g):
        _accum(a, g * out)

    return _node(out, (a,), vjp)


def log(a: Tensor) -> Tensor:
    out = np.log(a.value)

    def vjp(g):
        _accum(a, g / a.value)

    return _node(out, (a,), vjp)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.value)

    def vjp(g):
        _accum(a, g * (1.0 - out * out))

    return _node(out, (a,), vjp)


def sigmoid(a: Tensor) -> Tensor:
    x = a.value
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)

    def vjp(g):
        _accum(a, g * out * (1.0 - out))

    return _node(out, (a,), vjp)


def relu(a: Tensor) -> Tensor:
    out = np.maximum(a.value, 0)

    def vjp(g):
        _accum(a, g * (a.value > 0))

    return _node(out, (a,), vjp)


def softplus(a: Tensor) -> Tensor:
    """log(1 + e^x), computed without overflow at either tail."""
    x = a.value
    out = np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0)

    def vjp(g):
        sig = np.empty_like(x)
        pos = x >= 0
        sig[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        sig[~pos] = ex / (1.0 + ex)
        _accum(a, g * sig)

    return _node(out, (a,), vjp)


def identity(a: Tensor) -> Tensor:
    return a


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    out = np.clip(a.value, lo, hi)

    def vjp(g):
        _accum(a, g * ((a.value >= lo) & (a.value <= hi)))

    return _node(out, (a,), vjp)


# ---------------------------------------------------------------------------
# shape and indexing
# ---------------------------------------------------------------------------


def reshape(a: Tensor, shape) -> Tensor:
    orig = a.value.shape
    return _node(a.value.reshape(shape), (a,), lambda g: _accum(a, g.reshape(orig)))


def transpose(a: Tensor, axes) -> Tensor:
    inv = tuple(np.argsort(axes))
    return _node(a.value.transpose(axes), (a,), lambda g: _accum(a, g.transpose(inv)))


def concat(tensors, axis: int) -> Tensor:
    parts = tuple(tensors)
    out = np.concatenate([t.value for t in parts], axis=axis)
    sizes = [t.value.shape[axis] for t in parts]
    bounds = np.cumsum([0] + sizes)

    def vjp(g):
        for t, lo, hi in zip(parts, bounds[:-1], bounds[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            _accum(t, g[tuple(sl)])

    return _node(out, parts, vjp)


def gather_rows(table: Tensor, idx) -> Tensor:
    """Row lookup: table (R, D) indexed by an integer array of any shape."""
    idx = np.asarray(idx)
    out = table.value[idx]

    def vjp(g):
        if table.requires_grad:
            acc = np.zeros_like(table.value)
            np.add.at(acc, idx, g)
            _accum(table, acc)

    return _node(out, (table,), vjp)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product with broadcasting over leading axes."""
    av, bv = a.value, b.value
    if av.ndim < 2 or bv.ndim < 2 or av.shape[-1] != bv.shape[-2]:
        raise ShapeError(f"matmul shape mismatch: {av.shape} @ {bv.shape}")
    out = np.matmul(av, bv)

    def vjp(g):
        _accum(a, _unbroadcast(np.matmul(g, bv.swapaxes(-1, -2)), av.shape))
        _accum(b, _unbroadcast(np.matmul(av.swapaxes(-1, -2), g), bv.shape))

    return _node(out, (a, b), vjp)


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------


def tensor_sum(a: Tensor, axis=None, keepdims=False) -> Tensor:
    out = np.asarray(a.value.sum(axis=axis, keepdims=keepdims))

    def vjp(g):
        gg = np.asarray(g)
        if axis is not None and not keepdims:
            gg = np.expand_dims(gg, axis)
        _accum(a, np.broadcast_to(gg, a.value.shape).copy())

    return _node(out, (a,), vjp)


def mean(a: Tensor, axis=None, keepdims=False) -> Tensor:
    if axis is None:
        count = a.value.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([a.value.shape[ax] for ax in axes]))
    out = np.asarray(a.value.mean(axis=axis, keepdims=keepdims))

    def vjp(g):
        gg = np.asarray(g)
        if axis is not None and not keepdims:
            gg = np.expand_dims(gg, axis)
        _accum(a, np.broadcast_to(gg, a.value.shape) / count)

    return _node(out, (a,), vjp)


# ---------------------------------------------------------------------------
# fused softmax family
# ---------------------------------------------------------------------------


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    x = a.value
    shifted = x - x.max(axis=axis, keepdims=True)
    ex = np.exp(shifted)
    out = ex / ex.sum(axis=axis, keepdims=True)

    def vjp(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        _accum(a, out * (g - dot))

    return _node(out, (a,), vjp)


def cross_entropy(logits: Tensor, targets, mask=None, reduction: str = "mean") -> Tensor:
    """Negative log-likelihood of integer targets under softmax(logits).

    ``targets`` indexes the last axis; ``mask`` (same shape as targets)
    selects which positions contribute. ``mean`` divides by the number of
    selected positions, ``sum`` does not.
    """
    targets = np.asarray(targets)
    x = logits.value
    shifted = x - x.max(axis=-1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    logp = shifted - logz
    nll = -np.take_along_axis(logp, targets[..., None], axis=-1)[..., 0]
    if mask is None:
        m = np.ones(targets.shape, dtype=x.dtype)
    else:
        m = np.asarray(mask, dtype=x.dtype)
    total = float(m.sum())
    if reduction == "mean":
        denom = max(total, 1.0)
    elif reduction == "sum":
        denom = 1.0
    else:
        raise ValueError(f"unknown reduction {reduction!r}")
    out = np.asarray((nll * m).sum() / denom, dtype=x.dtype)

    def vjp(g):
        probs = np.exp(logp)
        np.subtract.at(probs, (*np.indices(targets.shape), targets), 1.0)
        probs *= (m / denom)[..., None]
        _accum(logits, probs * g)

    return _node(out, (logits,), vjp)


def dropout(a: Tensor, rate: float, rng, training: bool) -> Tensor:
    """Inverted dropout with a mask drawn from the given deterministic stream."""
    if not training or rate <= 0.0:
        return a
    keep = (rng.uniform(a.value.shape) >= rate).astype(a.value.dtype)
    scale = np.asarray(1.0 / (1.0 - rate), dtype=a.value.dtype)
    return mul(a, Tensor(keep * scale))
