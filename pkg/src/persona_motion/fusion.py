"""Context-aware fusion of several persona inputs.

Each input motion is scored by the cosine similarity between its clip-space
embedding and the prompt personalised with the mean persona token. The top
``k`` scores are softmax-normalised into weights (zero elsewhere), and the
weights blend the inputs' visual features and persona tokens.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import ConfigError, ContractError, DataError, ShapeError

WEIGHT_SUM_TOLERANCE = 1e-6


@dataclass(frozen=True)
class CAFConfig:
    k: int = 5
    normalize_over_all: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"k must be at least 1, got {self.k}")


@dataclass
class FusedCondition:
    mean_token: np.ndarray      # (d_txt,)
    text_feature: np.ndarray    # (d_clip,)


@dataclass
class CAFResult:
    similarities: np.ndarray
    weights: np.ndarray
    selected: tuple
    V_star: np.ndarray
    P_star: np.ndarray
    condition: FusedCondition | None = None


def mean_persona_token(P_stars):
    P = np.asarray(P_stars)
    if P.ndim != 2 or len(P) == 0:
        raise DataError(f"need at least one persona token, got shape {P.shape}")
    return P.sum(axis=0) / len(P)


def topk_softmax(similarities, k, normalize_over_all=False):
    """Softmax weights restricted to the ``k`` largest scores.

    Ties at the k-th rank go to the lower index. Returns (weights, selected)
    where ``selected`` lists the chosen indices in rank order.
    """
    s = np.asarray(similarities, dtype=np.float64)
    if s.ndim != 1 or len(s) == 0:
        raise ShapeError(f"similarities must be a non-empty vector, got shape {s.shape}")
    if k < 1:
        raise ConfigError(f"k must be at least 1, got {k}")
    order = np.argsort(-s, kind="stable")
    selected = order[: min(k, len(s))]
    shift = s.max()
    e = np.exp(s[selected] - shift)
    denom = np.exp(s - shift).sum() if normalize_over_all else e.sum()
    w = np.zeros_like(s)
    w[selected] = e / denom
    return w, tuple(int(i) for i in selected)


def _fit_length(v, length):
    """Centre-crop or zero-pad the frame rows of ``v`` (row 0 is the class token)."""
    cls, frames = v[:1], v[1:]
    n = len(frames)
    if n > length:
        lo = (n - length) // 2
        frames = frames[lo:lo + length]
    elif n < length:
        before = (length - n) // 2
        frames = np.pad(frames, ((before, length - n - before), (0, 0)))
    return np.concatenate([cls, frames])


def fuse(V_stars, P_stars, weights, length=None):
    """Weighted sums of visual features and persona tokens.

    ``V_stars`` is a list of (1 + f_i, d) arrays; their frame rows are
    brought to ``length`` (default: the longest input) first.
    """
    w = np.asarray(weights, dtype=np.float64)
    if abs(w.sum() - 1.0) > WEIGHT_SUM_TOLERANCE:
        raise ContractError(f"fusion weights sum to {w.sum():.8f}, not 1")
    if not len(V_stars) == len(P_stars) == len(w):
        raise ShapeError(f"{len(V_stars)} visual features, {len(P_stars)} tokens, {len(w)} weights")
    if length is None:
        length = max(len(v) for v in V_stars) - 1
    V = np.stack([_fit_length(np.asarray(v), length) for v in V_stars])
    P = np.asarray(P_stars)
    dtype = V.dtype
    return np.tensordot(w, V, axes=1).astype(dtype), np.tensordot(w, P, axes=1).astype(P.dtype)


def uniform_weights(n):
    return np.full(n, 1.0 / n)


@dataclass
class PersonaInputs:
    """Per-input visual features, persona tokens and pooled clip embeddings."""

    V_stars: list
    P_stars: np.ndarray
    embeddings: np.ndarray

    def __len__(self):
        return len(self.V_stars)

    def subset(self, idx):
        return PersonaInputs([self.V_stars[i] for i in idx], self.P_stars[idx], self.embeddings[idx])


def persona_inputs(model, motions) -> PersonaInputs:
    """Run the extractor and the clip motion encoder over (f_i, D) input motions."""
    if len(motions) == 0:
        raise DataError("context-aware fusion needs at least one input motion")
    n = len(motions)
    V, P, E = [None] * n, [None] * n, [None] * n
    by_len = {}
    for i, m in enumerate(motions):
        by_len.setdefault(len(m), []).append(i)
    with nn.no_grad():
        for idx in by_len.values():
            batch = np.stack([motions[i] for i in idx]).astype(nn.default_dtype())
            feats = model.persona_features(batch)
            pooled, _ = model.clip.motion(batch)
            for j, i in enumerate(idx):
                V[i], P[i], E[i] = feats.V_star.data[j], feats.P_star.data[j], pooled.data[j]
    return PersonaInputs(V, np.stack(P), np.stack(E))


def caf(model, inputs: PersonaInputs, prompt, config: CAFConfig = CAFConfig(), s_t=None) -> CAFResult:
    """Context-aware fusion of precomputed persona inputs for one prompt."""
    P_bar = mean_persona_token(inputs.P_stars)
    with nn.no_grad():
        T_bar = model.text_condition([prompt], P_bar[None].astype(nn.default_dtype()), s_t).data[0]
    t_unit = T_bar / max(np.linalg.norm(T_bar), 1e-12)
    E = inputs.embeddings
    S = (E / np.maximum(np.linalg.norm(E, axis=1, keepdims=True), 1e-12)) @ t_unit
    w, selected = topk_softmax(S, config.k, config.normalize_over_all)
    # under the all-inputs reading the weights sum to less than one, which
    # shrinks the fused features by that mass
    mass = w.sum()
    V_f, P_f = fuse(inputs.V_stars, inputs.P_stars, w / mass)
    if config.normalize_over_all:
        V_f, P_f = V_f * mass, P_f * mass
    return CAFResult(S, w, selected, V_f, P_f, FusedCondition(P_bar, T_bar))


def context_aware_fusion(model, motions, prompt, config: CAFConfig = CAFConfig(), s_t=None) -> CAFResult:
    """Fuse several input motions (list of (f_i, D) arrays) for one prompt."""
    return caf(model, persona_inputs(model, motions), prompt, config, s_t)


def mean_fusion(inputs: PersonaInputs) -> CAFResult:
    """Uniform-weight fusion of every input (the comparison baseline for CAF)."""
    n = len(inputs)
    w = uniform_weights(n)
    V_f, P_f = fuse(inputs.V_stars, inputs.P_stars, w)
    return CAFResult(np.zeros(n), w, tuple(range(n)), V_f, P_f)
