"""AdamW with decoupled weight decay."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError


@dataclass
class OptimizerConfig:
    learning_rate: float = 1e-4
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    max_grad_norm: float | None = None

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        for name in ("beta1", "beta2"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1), got {value}")


class AdamW:
    """Updates a fixed list of named parameters in place.

    Parameters whose ``grad`` is None are treated as having zero gradient so
    that weight decay still applies.
    """

    def __init__(self, named_params, config: OptimizerConfig | None = None):
        self.params = list(named_params)
        self.config = config or OptimizerConfig()
        self.step_count = 0

    def zero_grad(self):
        for _, p in self.params:
            p.grad = None

    def grad_norm(self):
        total = 0.0
        for _, p in self.params:
            if p.grad is not None:
                total += float(np.sum(p.grad.astype(np.float64) ** 2))
        return total ** 0.5

    def step(self):
        cfg = self.config
        for name, p in self.params:
            if p.grad is not None and not np.all(np.isfinite(p.grad)):
                raise FloatingPointError(f"non-finite gradient in parameter {name!r}")
        scale = 1.0
        if cfg.max_grad_norm is not None:
            norm = self.grad_norm()
            if norm > cfg.max_grad_norm:
                scale = cfg.max_grad_norm / (norm + 1e-12)
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - cfg.beta1 ** t
        bc2 = 1.0 - cfg.beta2 ** t
        for _, p in self.params:
            g = np.zeros_like(p.data) if p.grad is None else p.grad * scale
            if cfg.weight_decay:
                p.data -= cfg.learning_rate * cfg.weight_decay * p.data
            p.exp_avg *= cfg.beta1
            p.exp_avg += (1.0 - cfg.beta1) * g
            p.exp_avg_sq *= cfg.beta2
            p.exp_avg_sq += (1.0 - cfg.beta2) * g * g
            denom = np.sqrt(p.exp_avg_sq / bc2) + cfg.epsilon
            p.data -= cfg.learning_rate * (p.exp_avg / bc1) / denom


def adamw_step(named_params, config: OptimizerConfig, step: int):
    """Functional single step; ``step`` is the 1-based step index after this update."""
    opt = AdamW(named_params, config)
    opt.step_count = step - 1
    opt.step()
    return [p for _, p in opt.params]
