"""Noise schedules, forward noising, and the DDPM posterior."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import BoundsError, ConfigError, ShapeError

COSINE_OFFSET = 0.008


def cosine_alpha_bar(u):
    """Continuous cosine cumulative signal level at normalised time ``u`` in [0, 1]."""
    f = np.cos((u + COSINE_OFFSET) / (1 + COSINE_OFFSET) * math.pi / 2) ** 2
    f0 = math.cos(COSINE_OFFSET / (1 + COSINE_OFFSET) * math.pi / 2) ** 2
    return f / f0


@dataclass(frozen=True)
class DiffusionSchedule:
    betas: np.ndarray
    kind: str = "cosine"

    @property
    def T(self):
        return len(self.betas)

    @property
    def alphas(self):
        return 1.0 - self.betas

    @property
    def alpha_bar(self):
        return np.cumprod(self.alphas)

    @property
    def alpha_bar_prev(self):
        return np.concatenate([[1.0], self.alpha_bar[:-1]])

    @property
    def posterior_variance(self):
        return self.betas * (1.0 - self.alpha_bar_prev) / (1.0 - self.alpha_bar)

    @property
    def posterior_coef_x0(self):
        return self.betas * np.sqrt(self.alpha_bar_prev) / (1.0 - self.alpha_bar)

    @property
    def posterior_coef_xt(self):
        return (1.0 - self.alpha_bar_prev) * np.sqrt(self.alphas) / (1.0 - self.alpha_bar)


def make_schedule(T=50, kind="cosine", max_beta=0.999) -> DiffusionSchedule:
    """Index ``t`` runs 0..T-1; index 0 is the least noisy step."""
    if T < 2:
        raise ConfigError(f"schedule needs at least 2 steps, got {T}")
    if kind == "cosine":
        steps = np.arange(T + 1) / T
        ab = cosine_alpha_bar(steps)
        betas = np.minimum(1.0 - ab[1:] / ab[:-1], max_beta)
    elif kind == "linear":
        scale = 1000.0 / T
        betas = np.linspace(scale * 1e-4, min(scale * 0.02, max_beta), T)
    else:
        raise ConfigError(f"unknown schedule kind {kind!r}; expected 'cosine' or 'linear'")
    return DiffusionSchedule(betas.astype(np.float64), kind)


def q_sample(M0, t, noise, schedule: DiffusionSchedule):
    """``sqrt(abar_t) * M0 + sqrt(1 - abar_t) * noise``; ``t`` scalar or per-batch (B,)."""
    M0 = np.asarray(M0)
    noise = np.asarray(noise)
    if noise.shape != M0.shape:
        raise ShapeError(f"noise shape {noise.shape} != clean shape {M0.shape}")
    t = np.asarray(t)
    if np.any(t < 0) or np.any(t >= schedule.T):
        raise BoundsError(f"timestep {t} outside 0..{schedule.T - 1}")
    ab = schedule.alpha_bar[t]
    if ab.ndim:
        ab = ab.reshape(ab.shape + (1,) * (M0.ndim - ab.ndim))
    return (np.sqrt(ab) * M0 + np.sqrt(1.0 - ab) * noise).astype(M0.dtype)


def posterior_step(xt, x0_hat, t, schedule: DiffusionSchedule, noise):
    """Draw from q(x_{t-1} | x_t, x0_hat); at t == 0 return ``x0_hat``."""
    if t == 0:
        return x0_hat
    mean = schedule.posterior_coef_x0[t] * x0_hat + schedule.posterior_coef_xt[t] * xt
    return (mean + math.sqrt(schedule.posterior_variance[t]) * noise).astype(xt.dtype)
