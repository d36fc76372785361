"""Transformer denoiser that predicts the clean motion."""

from __future__ import annotations

import numpy as np

from .. import nn
from ..adaptation import AdaptiveLayer, VisualGate
from ..config import ModelConfig
from ..data.layout import LAYOUT
from ..errors import ShapeError
from ..nn import Module, Parameter, Tensor


class Denoiser(Module):
    """x0-predicting transformer.

    The sequence is ``[condition token, frame_1 .. frame_f]``; the condition
    token is the projected text feature plus a timestep embedding. After
    ``attach_adapters`` every block hosts a gated adaptive layer between its
    self-attention and feed-forward sublayers.
    """

    def __init__(self, cfg: ModelConfig, rng, channels=LAYOUT.dim, T=50):
        self.cfg = cfg
        self.channels = channels
        self.inp = nn.Linear(channels, cfg.d_model, rng)
        self.cond_proj = nn.Linear(cfg.d_clip, cfg.d_model, rng)
        self.time_mlp = nn.MLP(cfg.d_model, cfg.d_model, cfg.d_model, rng)
        self.blocks = [nn.TransformerBlock(cfg.d_model, cfg.heads, cfg.ff_mult, rng)
                       for _ in range(cfg.denoiser_depth)]
        self.norm_out = nn.LayerNorm(cfg.d_model)
        self.out = nn.Linear(cfg.d_model, channels, rng)
        self.null_text = Parameter(rng.normal(0.0, 0.1, size=(cfg.d_clip,)))
        self.adapters = None
        self.visual_gates = None
        self._pos = nn.sinusoidal_table(cfg.max_len, cfg.d_model)
        self._time = nn.sinusoidal_table(T, cfg.d_model)

    def base_parameters(self):
        """Pretrained weights: everything except adapters, gates, and the null text vector."""
        skip = {id(self.null_text)}
        if self.adapters is not None:
            skip |= {id(p) for m in self.adapters + self.visual_gates for p in m.parameters()}
        return [(n, p) for n, p in self.named_parameters() if id(p) not in skip]

    def attach_adapters(self, rng, kind="self"):
        self.adapters = [AdaptiveLayer(self.cfg.d_model, self.cfg.heads, rng, kind)
                         for _ in self.blocks]
        self.visual_gates = [VisualGate() for _ in self.blocks]
        return self

    def forward(self, Mt, t, T_star, text_drop=None, V_star=None, v_present=None, s_v=None):
        """Predict M0.

        Mt: (B, f, D) array or Tensor; t: (B,) int steps; T_star: (B, d_clip)
        Tensor; text_drop: (B,) bool, True replaces T_star with the null
        text vector; V_star: (B, m, d_model) or None; v_present: (B,) bool.
        """
        x = nn.as_tensor(Mt)
        if x.shape[-1] != self.channels:
            raise ShapeError(f"motion has {x.shape[-1]} channels, denoiser expects {self.channels}")
        b, f = x.shape[0], x.shape[1]
        T_star = nn.as_tensor(T_star)
        if text_drop is not None:
            drop = np.asarray(text_drop, dtype=x.dtype).reshape(b, 1)
            T_star = T_star * (1.0 - drop) + self.null_text.reshape(1, -1) * drop
        temb = self._time[np.asarray(t)].astype(x.dtype)
        cond = self.cond_proj(T_star) + self.time_mlp(Tensor(temb, dtype=x.dtype))
        frames = self.inp(x) + self._pos[:f].astype(x.dtype)
        h = nn.concat([cond.reshape(b, 1, -1), frames], axis=1)
        for i, block in enumerate(self.blocks):
            mid = None
            if self.adapters is not None:
                adapter, gate = self.adapters[i], self.visual_gates[i]

                def mid(z, adapter=adapter, gate=gate):
                    return adapter(z, V_star, gate, v_present, s_v)
            h = block(h, mid=mid)
        return self.out(self.norm_out(h[:, 1:]))
