"""Persona extractor: class-token transformer over clip frame features.

The extractor prepends a learned class token to the frozen motion encoder's
frame features and runs a small transformer. The whole output sequence is
the visual persona feature, its first row ``Y`` feeds an MLP that produces
the persona token, and a projection head maps ``Y`` into the space where
the cohesion loss is computed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .config import ModelConfig
from .errors import BatchError, DataError
from .nn import Module, Parameter, Tensor


@dataclass
class CohesionConfig:
    temperature: float = 0.1
    d_proj: int = 32
    weight: float = 1e-2

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")


@dataclass
class PersonaFeatures:
    V_star: Tensor      # (B, f+1, d_model)
    Y: Tensor           # (B, d_model)
    P_star: Tensor      # (B, d_txt)

    def __len__(self):
        return self.V_star.shape[0]


class PersonaExtractor(Module):
    def __init__(self, cfg: ModelConfig, rng, d_proj=32):
        self.cfg = cfg
        self.cls_token = Parameter(rng.normal(0.0, 0.02, size=(cfg.d_model,)))
        self.encoder = nn.TransformerStack(cfg.extractor_depth, cfg.d_model, cfg.heads, cfg.ff_mult, rng)
        self.token_head = nn.MLP(cfg.d_model, cfg.d_model, cfg.d_txt, rng)
        self.proj_head = nn.MLP(cfg.d_model, cfg.d_model, d_proj, rng)

    def forward(self, frame_features) -> PersonaFeatures:
        """``frame_features`` is (B, f, d_model) from the frozen motion encoder."""
        x = nn.as_tensor(frame_features)
        b = x.shape[0]
        cls = self.cls_token.reshape(1, 1, -1) + np.zeros((b, 1, 1), dtype=x.dtype)
        v_star = self.encoder(nn.concat([cls, x], axis=1))
        y = v_star[:, 0]
        return PersonaFeatures(v_star, y, self.token_head(y))

    def extract(self, clip_model, motion) -> PersonaFeatures:
        """Run the frozen motion encoder without gradient, then the extractor."""
        with nn.no_grad():
            _, frames = clip_model.motion(motion)
        return self(Tensor(frames.data, dtype=frames.dtype))

    def project(self, y):
        return self.proj_head(y)


def default_positives(n2):
    """Anchor ``i`` pairs with ``i + N`` and vice versa."""
    if n2 % 2:
        raise BatchError(f"cohesion batch must hold 2N items, got {n2}")
    n = n2 // 2
    return np.concatenate([np.arange(n, n2), np.arange(n)])


def persona_cohesion_loss(Y, labels, temperature=0.1, head=None, positives=None):
    """Mean over all anchors of the single-positive contrastive loss.

    ``Y`` is (2N, d); ``head`` maps it to the projection space (identity when
    None). ``positives[i]`` is the index of anchor i's positive; it must
    share i's label.
    """
    Y = nn.as_tensor(Y)
    n2 = Y.shape[0]
    labels = np.asarray(labels)
    positives = default_positives(n2) if positives is None else np.asarray(positives)
    if len(labels) != n2 or len(positives) != n2:
        raise BatchError("labels and positives must match the batch size")
    bad = [i for i in range(n2) if positives[i] == i or labels[positives[i]] != labels[i]]
    if bad:
        raise BatchError(f"anchors {bad} have no positive of the same persona in the batch")
    z = nn.l2_normalize(head(Y) if head is not None else Y)
    sims = (z @ z.transpose()) * (1.0 / temperature)
    sims = sims + np.diag(np.full(n2, nn.layers.NEG_INF)).astype(sims.dtype)
    logp = nn.log_softmax(sims, axis=1)
    return -logp[np.arange(n2), positives].mean()


def sample_positive(anchor, group, rng):
    """Draw a clip of the anchor's persona other than the anchor itself.

    ``group`` is a list of clips (typically the anchor's persona group of
    the finetune split); clips of other personas are ignored.
    """
    pool = [c for c in group if c.persona_id == anchor.persona_id and c.key != anchor.key]
    if not pool:
        raise DataError(f"persona {anchor.persona_id} has no clip other than the anchor")
    return pool[int(rng.integers(0, len(pool)))]
