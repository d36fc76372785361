"""Denoiser, noise schedule, training loops, and guided sampling."""

from .denoiser import Denoiser
from .losses import contact_bce, diffusion_loss, velocity_loss
from .model import PersonalizedModel, PretrainedModel, PromptFeatureCache, clone_pretrained
from .sampling import GuidanceConfig, cfg_combine, cfg_predict, sample
from .schedule import DiffusionSchedule, cosine_alpha_bar, make_schedule, posterior_step, q_sample
from .train import (
    FinetuneConfig,
    PretrainConfig,
    finetune,
    finetune_step,
    frozen_grad_norm,
    pretrain_denoiser,
    sample_drops,
)
