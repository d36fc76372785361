"""Tensor, layers, and optimizer used by every model in the package."""

from .layers import (
    MLP,
    Embedding,
    LayerNorm,
    Linear,
    Module,
    MultiHeadAttention,
    TransformerBlock,
    TransformerStack,
    affine,
    attention,
    multi_head_self_attention,
    sinusoidal_table,
    xavier_uniform,
)
from .optim import AdamW, OptimizerConfig, adamw_step
from .tensor import (
    Parameter,
    Tensor,
    as_tensor,
    clamp,
    clamp_min,
    concat,
    default_dtype,
    exp,
    gelu,
    getitem,
    grad_enabled,
    l2_normalize,
    layer_norm,
    log,
    log_softmax,
    matmul,
    mean,
    no_grad,
    precision,
    relu,
    sigmoid,
    softmax,
    sqrt,
    stack,
    tanh,
    tsum,
)


def backward(loss):
    """Populate ``.grad`` on every parameter reachable from ``loss``."""
    loss.backward()
