"""Persona recognition accuracy: a small transformer classifier over raw motion."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .. import nn
from ..config import ModelConfig
from ..data import LAYOUT, crop, random_crop
from ..errors import ProtocolError
from ..nn import Module, Tensor

log = logging.getLogger(__name__)

MIN_VALIDATION_ACCURACY = 0.9


@dataclass
class PRATrainConfig:
    epochs: int = 40
    batch_size: int = 32
    learning_rate: float = 1e-3
    crop: int = 32
    min_accuracy: float = MIN_VALIDATION_ACCURACY


class PRAClassifier(Module):
    """Per-frame projection, two transformer blocks, mean pooling, linear head."""

    def __init__(self, persona_ids, cfg: ModelConfig, rng, channels=LAYOUT.dim):
        self.persona_ids = tuple(int(p) for p in persona_ids)
        self.inp = nn.Linear(channels, cfg.d_model, rng)
        self.stack = nn.TransformerStack(2, cfg.d_model, cfg.heads, cfg.ff_mult, rng)
        self.head = nn.Linear(cfg.d_model, len(self.persona_ids), rng)
        self._pos = nn.sinusoidal_table(cfg.max_len, cfg.d_model)
        self.validation_accuracy = None

    def forward(self, motion):
        x = nn.as_tensor(np.asarray(motion, dtype=nn.default_dtype()))
        h = self.inp(x) + self._pos[: x.shape[1]].astype(x.dtype)
        return self.head(self.stack(h).mean(axis=1))

    def classes(self, persona_ids):
        lookup = {p: i for i, p in enumerate(self.persona_ids)}
        return np.array([lookup[int(p)] for p in persona_ids])

    def predict(self, motion, batch_size=128):
        motion = np.asarray(motion)
        out = []
        with nn.no_grad():
            for lo in range(0, len(motion), batch_size):
                out.append(self(motion[lo:lo + batch_size]).data.argmax(axis=1))
        return np.array(self.persona_ids)[np.concatenate(out)]


def evaluation_crops(clips, length):
    """Deterministic start/middle/end crops of every clip, with their persona ids."""
    motion, ids = [], []
    for c in clips:
        for start in sorted({0, (c.frames - length) // 2, c.frames - length}):
            motion.append(crop(c, start, length).features)
            ids.append(c.persona_id)
    return np.stack(motion), np.array(ids)


def pra_score(classifier: PRAClassifier, motion, intended_ids):
    """Fraction of motions classified as their intended persona."""
    predicted = classifier.predict(motion)
    return float(np.mean(predicted == np.asarray(intended_ids)))


def train_pra(train_clips, validation_clips, cfg: PRATrainConfig, model_cfg: ModelConfig, rng):
    """Fit the classifier on ground truth; abort if held-out accuracy is too low."""
    persona_ids = sorted({c.persona_id for c in train_clips})
    model = PRAClassifier(persona_ids, model_cfg, rng)
    opt = nn.AdamW(model.named_parameters(), nn.OptimizerConfig(learning_rate=cfg.learning_rate))
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(train_clips))
        total = 0.0
        for lo in range(0, len(order), cfg.batch_size):
            batch = [train_clips[i] for i in order[lo:lo + cfg.batch_size]]
            x = np.stack([random_crop(c, cfg.crop, rng).features for c in batch])
            y = model.classes([c.persona_id for c in batch])
            logp = nn.log_softmax(model(x), axis=1)
            loss = -logp[np.arange(len(batch)), y].mean()
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += float(loss.data) * len(batch)
        log.debug("pra epoch %d loss %.4f", epoch, total / len(train_clips))
    motion, ids = evaluation_crops(validation_clips, cfg.crop)
    model.validation_accuracy = pra_score(model, motion, ids)
    if model.validation_accuracy < cfg.min_accuracy:
        raise ProtocolError(f"persona classifier reached only {model.validation_accuracy:.3f} held-out accuracy "
                            f"(need {cfg.min_accuracy}); persona recognition scores would be meaningless")
    return model
