"""Zero-gated text and visual adaptation paths.

Both paths add ``s * tanh(gamma) * branch`` to a frozen signal. ``gamma``
starts at exactly zero so a freshly attached adapter leaves the pretrained
model's output unchanged.
"""

from __future__ import annotations

import numpy as np

from . import nn
from .data.text import personalize, plain
from .errors import ConfigError, PromptError, ShapeError
from .nn import Module, Parameter

ADAPT_KINDS = ("self", "cross", "adain")


class Gate(Module):
    """Learnable scalar ``gamma`` (init 0) with a configured scale ``s``."""

    def __init__(self, scale=1.0):
        self.gamma = Parameter(np.zeros(()))
        self.scale = scale

    def factor(self, scale=None):
        s = self.scale if scale is None else scale
        return nn.tanh(self.gamma) * s


class TextGate(Gate):
    pass


class VisualGate(Gate):
    pass


def personalized_text_feature(text_encoder, prompts, P_star, gate: TextGate, scale=None, base=None):
    """Blend the plain sentence feature with the persona-injected one.

    ``prompts`` may be plain or personalised. The plain form gives the base
    feature; the personalised twin carries ``P_star`` in its placeholder
    slot. ``base`` may hold precomputed plain features.
    """
    prompts = [plain(p) for p in prompts]
    for p in prompts:
        if p.subject_index is None:
            raise PromptError(f"prompt {p.text!r} has no subject index")
    if base is None:
        with nn.no_grad():
            base = text_encoder(prompts)
        base = nn.Tensor(base.data, dtype=base.dtype)
    personal = text_encoder([personalize(p) for p in prompts], nn.as_tensor(P_star))
    return base + gate.factor(scale) * personal


class AdaptiveLayer(Module):
    """Attention adapter over the denoiser stream and the visual persona sequence.

    ``kind`` selects the adapter body: ``self`` attends over the concatenation
    ``[z, V*]`` and keeps the first ``n`` rows; ``cross`` lets ``z`` attend to
    ``V*`` only; ``adain`` modulates normalised ``z`` with statistics of
    ``V*``.
    """

    def __init__(self, dim, heads, rng, kind="self"):
        if kind not in ADAPT_KINDS:
            raise ConfigError(f"unknown adapter kind {kind!r}; expected one of {ADAPT_KINDS}")
        self.kind = kind
        self.dim = dim
        self.norm = nn.LayerNorm(dim)
        self.context_proj = nn.Linear(dim, dim, rng)
        if kind == "adain":
            self.style = nn.Linear(2 * dim, 2 * dim, rng)
        else:
            self.attn = nn.MultiHeadAttention(dim, heads, rng)

    def adapt(self, z, V_star, v_present=None):
        """Adapter body output for the ``z`` rows. ``v_present`` is a (B,) bool mask."""
        b, n, d = z.shape
        if V_star is not None and V_star.shape[-1] != d:
            raise ShapeError(f"visual feature width {V_star.shape[-1]} != stream width {d}")
        zn = self.norm(z)
        m = 0 if V_star is None else V_star.shape[1]
        present = np.ones(b, dtype=bool) if v_present is None else np.asarray(v_present, dtype=bool)
        ctx = self.context_proj(V_star) if m else None
        if self.kind == "self":
            if not m:
                return self.attn(zn)[:, :n]
            seq = nn.concat([zn, ctx], axis=1)
            mask = np.ones((b, n + m), dtype=bool)
            mask[:, n:] = present[:, None]
            return self.attn(seq, key_mask=mask)[:, :n]
        keep = present.astype(z.dtype).reshape(b, 1, 1)
        if not m or not present.any():
            return z * 0.0
        if self.kind == "cross":
            return self.attn.cross(zn, ctx) * keep
        mu = ctx.mean(axis=1)
        var = ((ctx - mu.reshape(b, 1, d)) ** 2).mean(axis=1)
        stats = self.style(nn.concat([mu, nn.sqrt(var + 1e-5)], axis=1))
        scale, shift = stats[:, :d].reshape(b, 1, d), stats[:, d:].reshape(b, 1, d)
        return (zn * (scale + 1.0) + shift) * keep

    def forward(self, z, V_star, gate: VisualGate, v_present=None, scale=None):
        return z + gate.factor(scale) * self.adapt(z, V_star, v_present)


def adaptive_layer_forward(z, V_star, gate, params: AdaptiveLayer, v_present=None, scale=None):
    return params(z, V_star, gate, v_present, scale)
