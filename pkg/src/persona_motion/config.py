"""Model dimensions and training hyperparameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields


@dataclass
class ModelConfig:
    d_model: int = 64
    d_txt: int = 64
    d_clip: int = 32
    d_proj: int = 32
    heads: int = 4
    ff_mult: int = 2
    clip_depth: int = 2
    extractor_depth: int = 2
    denoiser_depth: int = 4
    max_len: int = 128


@dataclass
class ClipTrainConfig:
    epochs: int = 60
    batch_size: int = 64
    learning_rate: float = 1e-3
    temperature: float = 0.1
    min_crop: int = 32
    max_crop: int = 48


def to_dict(cfg):
    return asdict(cfg)


def from_dict(cls, d):
    names = {f.name for f in fields(cls)}
    return cls(**{k: v for k, v in d.items() if k in names})
