"""Single-input and multiple-input evaluation of a personalised model."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass

import numpy as np

from .. import nn
from ..data import CONTENTS, crop, describe, random_crop
from ..data.text import VARIANTS
from ..diffusion.sampling import GuidanceConfig, sample
from ..errors import ConfigError, ProtocolError
from ..fusion import CAFConfig, caf, mean_fusion, persona_inputs
from .metrics import FeatureStats, diversity, fid, r_precision_curve
from .pra import evaluation_crops, pra_score

SETTINGS = ("SI", "MI")
METRIC_COLUMNS = ("fid", "rprec1", "rprec2", "rprec3", "pra", "diversity")
CSV_COLUMNS = ("protocol", "seed", "config_hash") + METRIC_COLUMNS


@dataclass(frozen=True)
class EvalProtocol:
    setting: str = "SI"
    inputs_per_set: int | None = None     # MI only; None uses every clip of the persona
    pool_size: int = 32
    samples: int = 96
    frames: int = 32
    fusion: str = "caf"                   # MI only: "caf" or "mean"
    diversity_pairs: int = 300
    batch_size: int = 48

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ConfigError(f"setting must be one of {SETTINGS}, got {self.setting!r}")
        if self.fusion not in ("caf", "mean"):
            raise ConfigError(f"fusion must be 'caf' or 'mean', got {self.fusion!r}")
        if self.samples < 2:
            raise ConfigError("at least two samples are needed for the distribution metrics")


def config_hash(config) -> str:
    """Short digest of a resolved configuration mapping."""
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


@dataclass
class Generation:
    prompts: list
    persona_ids: np.ndarray
    motion: np.ndarray
    fusion_weights: list


def _draw_prompts(n, rng, contents=CONTENTS):
    """Personalised prompts cycling through shuffled passes over every (content, wording) pair."""
    pairs = [(c, v) for c in contents for v in range(VARIANTS)]
    out = []
    while len(out) < n:
        out.extend(pairs[i] for i in rng.permutation(len(pairs)))
    return [describe(c, v, personalized=True) for c, v in out[:n]]


def _has_persona_paths(model):
    return getattr(model, "extractor", None) is not None


def _center_crop(clip, frames):
    return crop(clip, (clip.frames - frames) // 2, frames).features


def _conditions(protocol, model, inputs_split, prompts, guidance, caf_config, rng):
    """Per-sample (persona id, V*, P*, fusion weights) following the protocol's draw order."""
    n = len(prompts)
    personal = _has_persona_paths(model)
    if protocol.setting == "SI":
        picks = [inputs_split[int(rng.integers(len(inputs_split)))] for _ in range(n)]
        motion = np.stack([random_crop(c, protocol.frames, rng).features for c in picks])
        ids = np.array([c.persona_id for c in picks])
        if not personal:
            return ids, None, None, [None] * n
        with nn.no_grad():
            feats = model.persona_features(motion.astype(nn.default_dtype()))
        return ids, feats.V_star.data, feats.P_star.data, [np.ones(1)] * n

    groups = {}
    for c in inputs_split:
        groups.setdefault(c.persona_id, []).append(c)
    persona_order = sorted(groups)
    group_inputs = {}
    ids, V, P, weights = [], [], [], []
    for prompt in prompts:
        pid = persona_order[int(rng.integers(len(persona_order)))]
        group = groups[pid]
        size = len(group) if protocol.inputs_per_set is None else min(protocol.inputs_per_set, len(group))
        chosen = np.sort(rng.choice(len(group), size=size, replace=False))
        ids.append(pid)
        if not personal:
            weights.append(None)
            continue
        if pid not in group_inputs:
            group_inputs[pid] = persona_inputs(model, [_center_crop(c, protocol.frames) for c in group])
        inputs = group_inputs[pid].subset(chosen)
        if protocol.fusion == "mean":
            result = mean_fusion(inputs)
        else:
            result = caf(model, inputs, prompt, caf_config, guidance.s_t)
        V.append(result.V_star)
        P.append(result.P_star)
        weights.append(result.weights)
    if not personal:
        return np.array(ids), None, None, weights
    return np.array(ids), np.stack(V), np.stack(P), weights


def generate(protocol: EvalProtocol, model, inputs_split, schedule, guidance: GuidanceConfig, rng,
             caf_config: CAFConfig = CAFConfig(), contents=CONTENTS) -> Generation:
    """Draw prompts and persona inputs per the protocol and sample one motion each."""
    prompts = _draw_prompts(protocol.samples, rng, contents)
    ids, V, P, weights = _conditions(protocol, model, inputs_split, prompts, guidance, caf_config, rng)
    out = []
    for lo in range(0, len(prompts), protocol.batch_size):
        hi = lo + protocol.batch_size
        out.append(sample(prompts[lo:hi], model, schedule, guidance, rng, frames=protocol.frames,
                          V_star=None if V is None else V[lo:hi], P_star=None if P is None else P[lo:hi]))
    return Generation(prompts, ids, np.concatenate(out), weights)


def clip_embeddings(clip_model, motion, batch_size=128):
    with nn.no_grad():
        parts = [clip_model.motion(np.asarray(motion[lo:lo + batch_size], dtype=nn.default_dtype()))[0].data
                 for lo in range(0, len(motion), batch_size)]
    return np.concatenate(parts)


def reference_stats(clip_model, clips, frames=32) -> FeatureStats:
    motion, _ = evaluation_crops(clips, frames)
    return FeatureStats.from_embeddings(clip_embeddings(clip_model, motion))


def score(generation: Generation, clip_model, real: FeatureStats, classifier, protocol: EvalProtocol, rng):
    """All four metrics for one generation run, as a dict keyed by ``METRIC_COLUMNS``."""
    embs = clip_embeddings(clip_model, generation.motion)
    prompt_embs = clip_model.embed_prompts(generation.prompts)
    labels = [p.tokens for p in generation.prompts]
    distinct = len(set(labels))
    if distinct < protocol.pool_size:
        raise ProtocolError(f"only {distinct} distinct prompts were drawn; R-precision needs {protocol.pool_size}")
    rp = r_precision_curve(embs, prompt_embs, protocol.pool_size, 3, rng, labels)
    return {
        "fid": fid(FeatureStats.from_embeddings(embs), real),
        "rprec1": float(rp[0]), "rprec2": float(rp[1]), "rprec3": float(rp[2]),
        "pra": pra_score(classifier, generation.motion, generation.persona_ids),
        "diversity": diversity(embs, protocol.diversity_pairs, rng),
    }


def run_protocol(protocol: EvalProtocol, model, corpus, schedule, guidance: GuidanceConfig, classifier, seed,
                 config=None, caf_config: CAFConfig = CAFConfig(), split="test"):
    """Generate and score; returns ``(row, generation)`` where ``row`` is a CSV-ready dict."""
    rng = np.random.default_rng([seed, 0xE7A1])
    inputs_split = corpus.split(split)
    generation = generate(protocol, model, inputs_split, schedule, guidance, rng, caf_config,
                          corpus.manifest.contents)
    real = reference_stats(model.clip, inputs_split, protocol.frames)
    metrics = score(generation, model.clip, real, classifier, protocol, rng)
    row = {"protocol": protocol.setting, "seed": seed, "config_hash": config_hash(config or {}), **metrics}
    return row, generation


def format_rows(rows, extra_columns=()) -> str:
    """Render metric rows as CSV text with fixed float formatting."""
    columns = tuple(extra_columns) + CSV_COLUMNS
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([f"{row[c]:.6f}" if isinstance(row[c], float) else row[c] for c in columns])
    return buf.getvalue()
