"""Joint motion/text embedding space trained with symmetric InfoNCE."""

from __future__ import annotations

import logging

import numpy as np

from . import nn
from .config import ClipTrainConfig, ModelConfig
from .data import LAYOUT, CONTENTS, all_prompts, describe, random_crop
from .data.text import PAD_ID, START_ID, VOCAB
from .errors import BatchError, ShapeError, UsageError, VocabularyError
from .nn import Module, Tensor

log = logging.getLogger(__name__)


def _as_batch(x):
    return x if isinstance(x, (list, tuple)) else [x]


class ClipTextEncoder(Module):
    """Word embeddings -> 2 transformer blocks -> projection of the first position."""

    def __init__(self, cfg: ModelConfig, rng):
        self.cfg = cfg
        self.embedding = nn.Embedding(len(VOCAB), cfg.d_txt, rng)
        self.stack = nn.TransformerStack(cfg.clip_depth, cfg.d_txt, cfg.heads, cfg.ff_mult, rng)
        self.proj = nn.Linear(cfg.d_txt, cfg.d_clip, rng)
        self._pos = nn.sinusoidal_table(cfg.max_len, cfg.d_txt)

    def token_matrix(self, prompts):
        length = 1 + max(len(p.tokens) for p in prompts)
        ids = np.full((len(prompts), length), PAD_ID, dtype=np.int64)
        ids[:, 0] = START_ID
        for i, p in enumerate(prompts):
            if any(t < 0 or t >= len(VOCAB) for t in p.tokens):
                raise VocabularyError(f"prompt {p.text!r} has out-of-vocabulary token ids")
            ids[i, 1:1 + len(p.tokens)] = p.tokens
        return ids, ids != PAD_ID

    def embed(self, prompts, injections=None):
        """Token embeddings (with the start token) before the transformer.

        ``injections`` is a Tensor (B, d_txt) whose row i replaces the
        embedding at prompt i's placeholder position.
        """
        prompts = _as_batch(prompts)
        ids, mask = self.token_matrix(prompts)
        emb = self.embedding(ids)
        if injections is not None:
            if injections.shape != (len(prompts), self.cfg.d_txt):
                raise ShapeError(f"injection shape {injections.shape} != ({len(prompts)}, {self.cfg.d_txt})")
            select = np.zeros(ids.shape + (1,), dtype=emb.dtype)
            for i, p in enumerate(prompts):
                if p.placeholder_index is None:
                    raise UsageError(f"prompt {p.text!r} has no placeholder to inject into")
                select[i, 1 + p.placeholder_index] = 1.0
            emb = emb * (1.0 - select) + select * injections.reshape(len(prompts), 1, self.cfg.d_txt)
        pos = self._pos[: ids.shape[1]].astype(emb.dtype)
        return emb, mask, pos

    def forward(self, prompts, injections=None):
        emb, mask, pos = self.embed(prompts, injections)
        h = self.stack(emb + pos, key_mask=mask)
        return nn.l2_normalize(self.proj(h[:, 0]))


class ClipMotionEncoder(Module):
    """Per-frame projection -> 2 transformer blocks; pooled + per-frame outputs."""

    def __init__(self, cfg: ModelConfig, rng, channels=LAYOUT.dim):
        self.cfg = cfg
        self.channels = channels
        self.inp = nn.Linear(channels, cfg.d_model, rng)
        self.stack = nn.TransformerStack(cfg.clip_depth, cfg.d_model, cfg.heads, cfg.ff_mult, rng)
        self.proj = nn.Linear(cfg.d_model, cfg.d_clip, rng)
        self._pos = nn.sinusoidal_table(cfg.max_len, cfg.d_model)

    def forward(self, motion):
        """``motion`` is (B, f, D) array/Tensor; returns (pooled (B, d_clip), frames (B, f, d_model))."""
        x = motion if isinstance(motion, Tensor) else Tensor(np.asarray(motion))
        if x.ndim == 2:
            x = x.reshape((1,) + x.shape)
        if x.shape[-1] != self.channels:
            raise ShapeError(f"motion has {x.shape[-1]} channels, encoder expects {self.channels}")
        h = self.inp(x) + self._pos[: x.shape[1]].astype(x.dtype)
        frames = self.stack(h)
        pooled = nn.l2_normalize(self.proj(frames.mean(axis=1)))
        return pooled, frames


class ClipModel(Module):
    def __init__(self, cfg: ModelConfig, rng):
        self.cfg = cfg
        self.text = ClipTextEncoder(cfg, rng)
        self.motion = ClipMotionEncoder(cfg, rng)

    # convenience wrappers on single items --------------------------------

    def encode_motion(self, clip):
        pooled, frames = self.motion(clip.features[None])
        return pooled[0], frames[0]

    def encode_text(self, prompt):
        return self.text([prompt])[0]

    def encode_text_with_injection(self, prompt, position, vector):
        if prompt.placeholder_index is None or position != prompt.placeholder_index:
            raise UsageError(f"position {position} is not the placeholder of {prompt.text!r}")
        vector = vector if isinstance(vector, Tensor) else Tensor(vector)
        return self.text([prompt], vector.reshape(1, -1))[0]

    def embed_clips(self, clips, batch_size=64):
        """Pooled embeddings for clips of any lengths, as an (n, d_clip) array."""
        out = np.zeros((len(clips), self.cfg.d_clip))
        by_len = {}
        for i, c in enumerate(clips):
            by_len.setdefault(c.frames, []).append(i)
        with nn.no_grad():
            for idx in by_len.values():
                for lo in range(0, len(idx), batch_size):
                    chunk = idx[lo:lo + batch_size]
                    pooled, _ = self.motion(np.stack([clips[i].features for i in chunk]))
                    out[chunk] = pooled.data
        return out

    def embed_prompts(self, prompts, batch_size=128):
        with nn.no_grad():
            parts = [self.text(prompts[i:i + batch_size]).data for i in range(0, len(prompts), batch_size)]
        return np.concatenate(parts)


def clip_contrastive_loss(motion_embs, text_embs, temperature):
    """Mean of motion->text and text->motion cross-entropy over cosine logits."""
    n = motion_embs.shape[0]
    if n < 2:
        raise BatchError(f"contrastive loss needs at least 2 pairs, got {n}")
    m = nn.l2_normalize(nn.as_tensor(motion_embs))
    t = nn.l2_normalize(nn.as_tensor(text_embs))
    logits = (m @ t.transpose()) * (1.0 / temperature)
    diag = (np.arange(n), np.arange(n))
    m2t = -nn.log_softmax(logits, axis=1)[diag].mean()
    t2m = -nn.log_softmax(logits, axis=0)[diag].mean()
    return (m2t + t2m) * 0.5


def content_recall_at_1(model: ClipModel, clips):
    """Fraction of clips whose nearest prompt (over all templates) has the right content."""
    prompts = all_prompts()
    text = model.embed_prompts(prompts)
    motion = model.embed_clips(clips)
    best = np.argmax(motion @ text.T, axis=1)
    hits = [prompts[j].content_id == c.content_id for j, c in zip(best, clips)]
    return float(np.mean(hits))


def train_clip(clips, cfg: ClipTrainConfig, model_cfg: ModelConfig, rng, model=None, on_epoch=None):
    """Train both encoders jointly; returns ``(model, history)``.

    ``history`` has one ``(epoch, mean_loss)`` row per epoch. A non-finite
    loss raises FloatingPointError after restoring the last good weights.
    """
    model = model or ClipModel(model_cfg, rng)
    opt = nn.AdamW(model.trainable_parameters(), nn.OptimizerConfig(learning_rate=cfg.learning_rate))
    history = []
    last_good = model.state_dict()
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(clips))
        losses = []
        for lo in range(0, len(order) - 1, cfg.batch_size):
            batch = [clips[i] for i in order[lo:lo + cfg.batch_size]]
            if len(batch) < 2:
                continue
            length = int(rng.integers(cfg.min_crop, cfg.max_crop + 1))
            length = min(length, min(c.frames for c in batch))
            motion = np.stack([random_crop(c, length, rng).features for c in batch])
            prompts = [describe(c.content_id, int(rng.integers(0, 8))) for c in batch]
            pooled, _ = model.motion(motion)
            loss = clip_contrastive_loss(pooled, model.text(prompts), cfg.temperature)
            if not np.isfinite(loss.data):
                model.load_state_dict(last_good)
                raise FloatingPointError(f"clip training diverged at epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(float(loss.data))
        history.append((epoch, float(np.mean(losses))))
        last_good = model.state_dict()
        if on_epoch:
            on_epoch(epoch, history[-1][1], model)
    return model, history


__all__ = [
    "ClipModel", "ClipTextEncoder", "ClipMotionEncoder", "clip_contrastive_loss",
    "train_clip", "content_recall_at_1", "CONTENTS",
]
