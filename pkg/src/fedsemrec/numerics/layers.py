"""Layer classes over the autodiff core: linear, embedding, layer norm,
multi-head self-attention, and the two-layer perceptron used everywhere."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigError, ShapeError
from .autodiff import (
    REAL,
    Parameter,
    Tensor,
    add,
    dropout,
    gather_rows,
    identity as _identity_fn,
    matmul,
    mean,
    mul,
    powc,
    relu,
    reshape,
    sigmoid,
    softmax,
    sub,
    tanh,
    transpose,
)
from .rng import Rng


class Linear:
    """Affine map on the last axis: x (…, n_in) -> (…, n_out)."""

    def __init__(self, n_in: int, n_out: int, rng: Rng, bias: bool = True):
        self.weight = Parameter(rng.normal((n_in, n_out), std=1.0 / math.sqrt(n_in)))
        self.bias = Parameter(np.zeros(n_out, dtype=REAL)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        out = matmul(x, self.weight)
        if self.bias is not None:
            out = add(out, self.bias)
        return out

    def parameters(self) -> list[Parameter]:
        return [self.weight] + ([self.bias] if self.bias is not None else [])


class Embedding:
    """Dense lookup table; row ``padding_idx`` starts at zero."""

    def __init__(self, rows: int, dim: int, rng: Rng, padding_idx: int | None = None):
        table = rng.normal((rows, dim), std=1.0 / math.sqrt(dim))
        if padding_idx is not None:
            table[padding_idx] = 0.0
        self.table = Parameter(table)
        self.padding_idx = padding_idx

    def __call__(self, idx) -> Tensor:
        idx = np.asarray(idx)
        if idx.size and (idx.min() < 0 or idx.max() >= self.table.value.shape[0]):
            raise ShapeError(
                f"embedding index out of range [0, {self.table.value.shape[0]}): "
                f"[{idx.min()}, {idx.max()}]"
            )
        return gather_rows(self.table, idx)

    def parameters(self) -> list[Parameter]:
        return [self.table]


class LayerNorm:
    """Normalize the last axis to zero mean / unit variance, then scale+shift."""

    def __init__(self, dim: int, eps: float = 1e-5):
        self.gain = Parameter(np.ones(dim, dtype=REAL))
        self.shift = Parameter(np.zeros(dim, dtype=REAL))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        centered = sub(x, mean(x, axis=-1, keepdims=True))
        variance = mean(mul(centered, centered), axis=-1, keepdims=True)
        inv = powc(add(variance, Tensor(np.asarray(self.eps, dtype=x.value.dtype))), -0.5)
        return add(mul(mul(centered, inv), self.gain), self.shift)

    def parameters(self) -> list[Parameter]:
        return [self.gain, self.shift]


class MultiHeadSelfAttention:
    """Scaled dot-product self-attention with an additive mask."""

    def __init__(self, dim: int, heads: int, rng: Rng):
        if dim % heads != 0:
            raise ConfigError(f"model dim {dim} not divisible by {heads} heads")
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.proj_q = Linear(dim, dim, rng)
        self.proj_k = Linear(dim, dim, rng)
        self.proj_v = Linear(dim, dim, rng)
        self.proj_out = Linear(dim, dim, rng)

    def _split(self, x: Tensor, batch: int, length: int) -> Tensor:
        return transpose(reshape(x, (batch, length, self.heads, self.head_dim)), (0, 2, 1, 3))

    def __call__(
        self,
        x: Tensor,
        attn_mask: np.ndarray | None = None,
        drop_rate: float = 0.0,
        rng: Rng | None = None,
        training: bool = False,
    ) -> Tensor:
        batch, length, _ = x.value.shape
        q = self._split(self.proj_q(x), batch, length)
        k = self._split(self.proj_k(x), batch, length)
        v = self._split(self.proj_v(x), batch, length)
        scores = matmul(q, transpose(k, (0, 1, 3, 2)))
        scores = mul(scores, Tensor(np.asarray(1.0 / math.sqrt(self.head_dim), dtype=x.value.dtype)))
        if attn_mask is not None:
            scores = add(scores, Tensor(attn_mask.astype(x.value.dtype)))
        weights = softmax(scores, axis=-1)
        if training and drop_rate > 0.0:
            weights = dropout(weights, drop_rate, rng, training=True)
        ctx = matmul(weights, v)
        merged = reshape(transpose(ctx, (0, 2, 1, 3)), (batch, length, self.dim))
        return self.proj_out(merged)

    def parameters(self) -> list[Parameter]:
        return (
            self.proj_q.parameters()
            + self.proj_k.parameters()
            + self.proj_v.parameters()
            + self.proj_out.parameters()
        )


_ACTIVATIONS = {
    "tanh": tanh,
    "sigmoid": sigmoid,
    "relu": relu,
    "identity": _identity_fn,
}


class Mlp2:
    """Two-layer perceptron with a configurable hidden activation."""

    def __init__(self, n_in: int, n_hidden: int, n_out: int, rng: Rng, activation: str = "tanh"):
        if activation not in _ACTIVATIONS:
            raise ConfigError(f"unknown activation {activation!r}")
        self.activation = activation
        self.lin1 = Linear(n_in, n_hidden, rng)
        self.lin2 = Linear(n_hidden, n_out, rng)

    @classmethod
    def identity_map(cls, dim: int) -> "Mlp2":
        """Square variant that computes exactly x -> x at initialization."""
        mlp = cls.__new__(cls)
        mlp.activation = "identity"
        mlp.lin1 = Linear.__new__(Linear)
        mlp.lin1.weight = Parameter(np.eye(dim, dtype=REAL))
        mlp.lin1.bias = Parameter(np.zeros(dim, dtype=REAL))
        mlp.lin2 = Linear.__new__(Linear)
        mlp.lin2.weight = Parameter(np.eye(dim, dtype=REAL))
        mlp.lin2.bias = Parameter(np.zeros(dim, dtype=REAL))
        return mlp

    def __call__(self, x: Tensor) -> Tensor:
        return self.lin2(_ACTIVATIONS[self.activation](self.lin1(x)))

    def parameters(self) -> list[Parameter]:
        return self.lin1.parameters() + self.lin2.parameters()
