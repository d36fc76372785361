"""Pretraining and finetuning loops."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .. import nn
from ..config import ModelConfig
from ..data import describe, random_crop
from ..errors import IntegrityError
from ..persona import CohesionConfig, persona_cohesion_loss, sample_positive
from .denoiser import Denoiser
from .losses import diffusion_loss
from .model import PersonalizedModel, PromptFeatureCache
from .schedule import DiffusionSchedule, q_sample

log = logging.getLogger(__name__)


@dataclass
class PretrainConfig:
    epochs: int = 60
    batch_size: int = 64
    learning_rate: float = 1e-3
    crop: int = 32
    drop_text: float = 0.1
    geo_weight: float = 1.0
    max_grad_norm: float | None = 1.0


@dataclass
class FinetuneConfig:
    epochs: int = 40
    batch_size: int = 64
    learning_rate: float = 1e-4
    crop: int = 32
    drop_text: float = 0.1
    drop_visual: float = 0.1
    geo_weight: float = 1.0
    s_t: float = 1.0
    s_v: float = 1.0
    max_grad_norm: float | None = 1.0
    cohesion: CohesionConfig = field(default_factory=CohesionConfig)


def sample_drops(n, p_text, p_visual, rng):
    """Independent per-element drop masks; True means the condition is replaced by null."""
    return rng.random(n) < p_text, rng.random(n) < p_visual


def _noised(M0, schedule, rng):
    t = rng.integers(0, schedule.T, size=M0.shape[0])
    noise = rng.standard_normal(M0.shape).astype(M0.dtype)
    return q_sample(M0, t, noise, schedule), t


def pretrain_denoiser(clips, clip_model, cfg: PretrainConfig, model_cfg: ModelConfig,
                      schedule: DiffusionSchedule, rng, on_epoch=None):
    """Train a denoiser from scratch on (clip, description) pairs; returns (denoiser, history)."""
    denoiser = Denoiser(model_cfg, rng, T=schedule.T)
    text_cache = PromptFeatureCache(clip_model)
    opt = nn.AdamW(denoiser.trainable_parameters(), nn.OptimizerConfig(learning_rate=cfg.learning_rate,
                                                                          max_grad_norm=cfg.max_grad_norm))
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(clips))
        sums = {}
        steps = 0
        for lo in range(0, len(order), cfg.batch_size):
            batch = [clips[i] for i in order[lo:lo + cfg.batch_size]]
            M0 = np.stack([random_crop(c, cfg.crop, rng).features for c in batch])
            prompts = [describe(c.content_id, int(rng.integers(0, 8))) for c in batch]
            Mt, t = _noised(M0, schedule, rng)
            text_drop = rng.random(len(batch)) < cfg.drop_text
            pred = denoiser(Mt, t, text_cache(prompts, M0.dtype), text_drop)
            losses = diffusion_loss(pred, M0, cfg.geo_weight)
            total = losses["total"]
            if not np.isfinite(total.data):
                raise FloatingPointError(f"denoiser pretraining diverged at epoch {epoch}")
            opt.zero_grad()
            total.backward()
            opt.step()
            for k, v in losses.items():
                sums[k] = sums.get(k, 0.0) + float(v.data)
            steps += 1
        row = {k: v / steps for k, v in sums.items()}
        row["epoch"] = epoch
        history.append(row)
        if on_epoch:
            on_epoch(epoch, row, denoiser)
    return denoiser, history


def frozen_grad_norm(model: PersonalizedModel):
    total = 0.0
    for _, p in model.frozen_parameters():
        if p.grad is not None:
            total += float(np.sum(np.asarray(p.grad, dtype=np.float64) ** 2))
    return total ** 0.5


def finetune_step(batch, model: PersonalizedModel, rng, config: FinetuneConfig, schedule,
                  groups, optimizer=None):
    """One finetuning update on ``batch`` (a list of clips).

    ``groups`` maps persona id to that persona's clips (positives are drawn
    from it). Returns a dict of scalar loss components plus the drop masks.
    With ``optimizer`` None, gradients are computed but no update is made.
    """
    n = len(batch)
    positives = [sample_positive(c, groups[c.persona_id], rng) for c in batch]
    inputs = np.stack([random_crop(c, config.crop, rng).features for c in batch])
    targets = np.stack([random_crop(c, config.crop, rng).features for c in batch])
    pos_inputs = np.stack([random_crop(c, config.crop, rng).features for c in positives])
    prompts = [describe(c.content_id, int(rng.integers(0, 8))) for c in batch]
    labels = np.array([c.persona_id for c in batch] + [c.persona_id for c in positives])

    weight = config.cohesion.weight
    if weight:
        feats = model.persona_features(np.concatenate([inputs, pos_inputs]))
        cohesion = persona_cohesion_loss(feats.Y, labels, config.cohesion.temperature,
                                         head=model.extractor.project)
        V_star, P_star = feats.V_star[:n], feats.P_star[:n]
    else:
        feats = model.persona_features(inputs)
        cohesion = None
        V_star, P_star = feats.V_star, feats.P_star

    text_drop, visual_drop = sample_drops(n, config.drop_text, config.drop_visual, rng)
    T_star = model.text_condition(prompts, P_star, config.s_t)
    Mt, t = _noised(targets, schedule, rng)
    pred = model.denoise(Mt, t, T_star, text_drop, V_star, ~visual_drop, config.s_v)
    losses = diffusion_loss(pred, targets, config.geo_weight)
    total = losses["total"] + cohesion * weight if cohesion is not None else losses["total"]
    if not np.isfinite(total.data):
        raise FloatingPointError("finetuning loss is not finite")

    for _, p in model.named_parameters():
        p.grad = None
    total.backward()
    frozen_norm = frozen_grad_norm(model)
    if frozen_norm != 0.0:
        raise IntegrityError(f"frozen parameters received gradient (norm {frozen_norm})")
    if optimizer is not None:
        optimizer.step()
    out = {k: float(v.data) for k, v in losses.items()}
    out["diffusion"] = out.pop("total")
    out["cohesion"] = float(cohesion.data) if cohesion is not None else 0.0
    out["total"] = float(total.data)
    out["frozen_grad_norm"] = frozen_norm
    out["text_drop"] = text_drop
    out["visual_drop"] = visual_drop
    return out


def finetune(model: PersonalizedModel, clips, config: FinetuneConfig, schedule, rng, on_epoch=None):
    """Run ``config.epochs`` epochs of finetune_step; returns per-epoch history rows."""
    groups = {}
    for c in clips:
        groups.setdefault(c.persona_id, []).append(c)
    opt = nn.AdamW(model.trainable_parameters(), nn.OptimizerConfig(learning_rate=config.learning_rate,
                                                                         max_grad_norm=config.max_grad_norm))
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(clips))
        sums, steps, frozen_max = {}, 0, 0.0
        for lo in range(0, len(order), config.batch_size):
            batch = [clips[i] for i in order[lo:lo + config.batch_size]]
            row = finetune_step(batch, model, rng, config, schedule, groups, opt)
            frozen_max = max(frozen_max, row["frozen_grad_norm"])
            for k in ("mse", "velocity", "contact", "diffusion", "cohesion", "total"):
                sums[k] = sums.get(k, 0.0) + row[k]
            steps += 1
        row = {k: v / steps for k, v in sums.items()}
        row.update(epoch=epoch, frozen_grad_norm=frozen_max,
                   gamma_t=float(model.text_gate.gamma.data),
                   gamma_v=float(np.mean([g.gamma.data for g in model.denoiser.visual_gates])))
        history.append(row)
        if on_epoch:
            on_epoch(epoch, row, model)
    return history
