"""Neural network layers built on the autodiff tensor."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigError, ShapeError
from . import tensor as T
from .tensor import Parameter, Tensor

NEG_INF = -1e9


def xavier_uniform(rng, fan_in, fan_out, shape=None):
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape or (fan_in, fan_out))


def affine(x, W, bias):
    """``x @ W + bias`` with the bias broadcast over rows."""
    if x.shape[-1] != W.shape[0]:
        raise ShapeError(f"affine: input shape {tuple(x.shape)} does not match weight shape {tuple(W.shape)}")
    out = T.matmul(x, W)
    if bias is not None:
        out = out + bias
    return out


def attention(q_in, kv_in, wq, wk, wv, wo, heads, key_mask=None):
    """Scaled dot-product attention of ``q_in`` over ``kv_in``.

    q_in is (..., n, d) and kv_in (..., m, d). ``key_mask`` is a boolean array
    broadcastable to (..., m) with False marking keys to ignore. Each of
    ``wq, wk, wv, wo`` is a ``(W, b)`` pair.
    """
    d = q_in.shape[-1]
    if d % heads:
        raise ConfigError(f"model width {d} is not divisible by {heads} heads")
    dh = d // heads
    lead = q_in.shape[:-2]
    n, m = q_in.shape[-2], kv_in.shape[-2]

    def split(x, length):
        return x.reshape(lead + (length, heads, dh)).swapaxes(-2, -3)

    q = split(affine(q_in, *wq), n)
    k = split(affine(kv_in, *wk), m)
    v = split(affine(kv_in, *wv), m)
    scores = T.matmul(q, k.swapaxes(-1, -2)) * (1.0 / math.sqrt(dh))
    if key_mask is not None:
        bias = np.where(np.asarray(key_mask), 0.0, NEG_INF).astype(scores.dtype)
        bias = bias.reshape(bias.shape[:-1] + (1, 1, bias.shape[-1]))
        scores = scores + bias
    weights = T.softmax(scores, axis=-1)
    ctx = T.matmul(weights, v).swapaxes(-2, -3).reshape(lead + (n, d))
    return affine(ctx, *wo)


def multi_head_self_attention(x, params, heads, key_mask=None):
    """Self-attention of ``x`` (..., n, d); ``params`` is a MultiHeadAttention."""
    return attention(x, x, params.wq, params.wk, params.wv, params.wo, heads, key_mask)


def sinusoidal_table(length, dim):
    pos = np.arange(length)[:, None]
    i = np.arange(dim // 2)[None, :]
    angle = pos / np.power(10000.0, 2 * i / dim)
    table = np.zeros((length, dim))
    table[:, 0::2] = np.sin(angle)
    table[:, 1::2] = np.cos(angle)
    return table


class Module:
    """Container that discovers Parameters and sub-Modules among its attributes."""

    def _children(self):
        for name, value in vars(self).items():
            if isinstance(value, (Parameter, Module)):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, (Parameter, Module)):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix=""):
        for name, value in self._children():
            full = f"{prefix}{name}"
            if isinstance(value, Parameter):
                yield full, value
            else:
                yield from value.named_parameters(full + ".")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def trainable_parameters(self):
        return [(n, p) for n, p in self.named_parameters() if p.trainable]

    def freeze(self):
        for p in self.parameters():
            p.freeze()
        return self

    def unfreeze(self):
        for p in self.parameters():
            p.unfreeze()
        return self

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def state_dict(self):
        return {n: p.data.copy() for n, p in self.named_parameters()}

    def load_state_dict(self, state, strict=True):
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if strict and (missing or unexpected):
            raise KeyError(f"state mismatch; missing={missing} unexpected={unexpected}")
        for name, value in state.items():
            if name in own:
                own[name].assign(value)

    def num_parameters(self):
        return sum(p.size for p in self.parameters())

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Linear(Module):
    def __init__(self, fan_in, fan_out, rng, bias=True):
        self.weight = Parameter(xavier_uniform(rng, fan_in, fan_out))
        self.bias = Parameter(np.zeros(fan_out)) if bias else None

    def forward(self, x):
        return affine(x, self.weight, self.bias)

    @property
    def pair(self):
        return self.weight, self.bias


class LayerNorm(Module):
    def __init__(self, dim):
        self.gamma = Parameter(np.ones(dim))
        self.beta = Parameter(np.zeros(dim))

    def forward(self, x):
        return T.layer_norm(x, self.gamma, self.beta)


class Embedding(Module):
    def __init__(self, count, dim, rng):
        self.table = Parameter(xavier_uniform(rng, count, dim))

    def forward(self, idx):
        return T.getitem(self.table, np.asarray(idx, dtype=np.int64))


class MLP(Module):
    """Two affine layers with a GELU between them."""

    def __init__(self, fan_in, hidden, fan_out, rng):
        self.fc1 = Linear(fan_in, hidden, rng)
        self.fc2 = Linear(hidden, fan_out, rng)

    def forward(self, x):
        return self.fc2(T.gelu(self.fc1(x)))


class MultiHeadAttention(Module):
    def __init__(self, dim, heads, rng):
        if dim % heads:
            raise ConfigError(f"model width {dim} is not divisible by {heads} heads")
        self.heads = heads
        self.q = Linear(dim, dim, rng)
        self.k = Linear(dim, dim, rng)
        self.v = Linear(dim, dim, rng)
        self.o = Linear(dim, dim, rng)

    @property
    def wq(self):
        return self.q.pair

    @property
    def wk(self):
        return self.k.pair

    @property
    def wv(self):
        return self.v.pair

    @property
    def wo(self):
        return self.o.pair

    def forward(self, x, key_mask=None):
        return multi_head_self_attention(x, self, self.heads, key_mask)

    def cross(self, x, context, key_mask=None):
        return attention(x, context, self.wq, self.wk, self.wv, self.wo, self.heads, key_mask)


class TransformerBlock(Module):
    """Pre-norm block: self-attention then feed-forward, each residual.

    ``mid`` is an optional callable applied between the two sublayers; the
    denoiser uses it to host the adaptive layer.
    """

    def __init__(self, dim, heads, ff_mult, rng):
        self.norm1 = LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, heads, rng)
        self.norm2 = LayerNorm(dim)
        self.ff = MLP(dim, ff_mult * dim, dim, rng)

    def forward(self, x, key_mask=None, mid=None):
        x = x + self.attn(self.norm1(x), key_mask)
        if mid is not None:
            x = mid(x)
        return x + self.ff(self.norm2(x))


class TransformerStack(Module):
    def __init__(self, depth, dim, heads, ff_mult, rng):
        self.blocks = [TransformerBlock(dim, heads, ff_mult, rng) for _ in range(depth)]
        self.norm = LayerNorm(dim)

    def forward(self, x, key_mask=None):
        for block in self.blocks:
            x = block(x, key_mask)
        return self.norm(x)
