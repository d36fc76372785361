"""Dual classifier-free guidance and ancestral sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import nn
from ..data.layout import LAYOUT
from ..errors import ConfigError, NumericError
from .schedule import DiffusionSchedule, posterior_step


@dataclass
class GuidanceConfig:
    g_t: float = 10.0
    g_v: float = 15.0
    b: float = 0.7
    s_t: float = 0.3
    s_v: float = 0.3

    def __post_init__(self):
        values = (self.g_t, self.g_v, self.b, self.s_t, self.s_v)
        if not all(np.isfinite(v) for v in values):
            raise ConfigError(f"guidance values must be finite: {values}")
        if not 0.0 <= self.b <= 1.0:
            raise ConfigError(f"balance b must lie in [0, 1], got {self.b}")

    @classmethod
    def single_input(cls, **kw):
        return cls(**{"b": 0.7, **kw})

    @classmethod
    def multi_input(cls, **kw):
        return cls(**{"b": 0.5, **kw})


def cfg_combine(full, visual_only, text_only, guidance: GuidanceConfig):
    """Blend the three conditional predictions.

    full = D(V*, T*), visual_only = D(V*, null), text_only = D(null, T*).
    """
    d_text = visual_only + guidance.g_t * (full - visual_only)
    d_visual = text_only + guidance.g_v * (full - text_only)
    return guidance.b * d_text + (1.0 - guidance.b) * d_visual


def _tile(x, k):
    if x is None:
        return None
    data = x.data if isinstance(x, nn.Tensor) else np.asarray(x)
    return nn.Tensor(np.concatenate([data] * k), dtype=data.dtype)


def cfg_predict(Mt, t, V_star, T_star, model, guidance: GuidanceConfig):
    """Guided clean-motion estimate at step ``t`` for a batch ``Mt`` (B, f, D)."""
    b = Mt.shape[0]
    tt = np.broadcast_to(np.asarray(t), (b,))
    with nn.no_grad():
        text_drop = np.concatenate([np.zeros(b, bool), np.ones(b, bool), np.zeros(b, bool)])
        v_present = np.concatenate([np.ones(b, bool), np.ones(b, bool), np.zeros(b, bool)])
        out = model.denoise(np.concatenate([Mt] * 3), np.concatenate([tt] * 3), _tile(T_star, 3),
                            text_drop, _tile(V_star, 3), v_present, guidance.s_v).data
    full, visual_only, text_only = out[:b], out[b:2 * b], out[2 * b:]
    return cfg_combine(full, visual_only, text_only, guidance)


def sample(prompts, model, schedule: DiffusionSchedule, guidance: GuidanceConfig, rng, frames=32,
           V_star=None, P_star=None, channels=LAYOUT.dim, contact=LAYOUT.contact, clip_x0=None):
    """Generate one motion per prompt; returns an array (B, frames, channels).

    ``V_star``/``P_star`` are per-prompt persona conditions (or None for
    none). Contact channels of the result are thresholded at 0.5.
    """
    b = len(prompts)
    with nn.no_grad():
        T_star = model.text_condition(prompts, P_star, guidance.s_t)
    T_star = T_star.data
    x = rng.standard_normal((b, frames, channels)).astype(T_star.dtype)
    for t in range(schedule.T - 1, -1, -1):
        x0 = cfg_predict(x, t, V_star, T_star, model, guidance)
        if clip_x0 is not None:
            x0 = np.clip(x0, -clip_x0, clip_x0)
        noise = rng.standard_normal(x.shape).astype(x.dtype)
        x = posterior_step(x, x0, t, schedule, noise)
        if not np.all(np.isfinite(x)):
            raise NumericError(f"sampling produced non-finite values at step {t}")
    idx = list(contact)
    x = x.copy()
    x[:, :, idx] = (x[:, :, idx] > 0.5).astype(x.dtype)
    return x
