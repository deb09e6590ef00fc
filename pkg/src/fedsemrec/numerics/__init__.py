"""Dense float32 linear algebra with reverse-mode gradients for a fixed layer set.

Matrices are C-contiguous numpy float32 arrays. The autodiff graph covers
exactly the operations the trainable modules need (linear maps, embedding
lookups, layer norm, softmax/cross-entropy, attention primitives, pooling,
pointwise activations); there is no general tape beyond that set.
"""

from .autodiff import (
    REAL,
    Parameter,
    Tensor,
    add,
    as_tensor,
    backward,
    clamp,
    concat,
    cross_entropy,
    dropout,
    exp,
    gather_rows,
    log,
    matmul,
    mean,
    mul,
    neg,
    powc,
    relu,
    reshape,
    sigmoid,
    softmax,
    softplus,
    sub,
    tanh,
    tensor_sum,
    transpose,
)
from .gradcheck import grad_check
from .layers import Embedding, LayerNorm, Linear, Mlp2, MultiHeadSelfAttention
from .optim import Adam, AdamState, adam_step
from .rng import Rng

__all__ = [
    "REAL",
    "Adam",
    "AdamState",
    "Embedding",
    "LayerNorm",
    "Linear",
    "Mlp2",
    "MultiHeadSelfAttention",
    "Parameter",
    "Rng",
    "Tensor",
    "adam_step",
    "add",
    "as_tensor",
    "backward",
    "clamp",
    "concat",
    "cross_entropy",
    "dropout",
    "exp",
    "gather_rows",
    "grad_check",
    "log",
    "matmul",
    "mean",
    "mul",
    "neg",
    "powc",
    "relu",
    "reshape",
    "sigmoid",
    "softmax",
    "softplus",
    "sub",
    "tanh",
    "tensor_sum",
    "transpose",
]
