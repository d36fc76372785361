"""Synthetic persona-motion corpus: generation, splits, and on-disk round trip."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import IntegrityError
from ..storage import read_store, write_store
from .layout import LAYOUT, ChannelLayout
from .motion import CONTENTS, NEUTRAL_ID, MotionClip, flip_lr, persona_params, synthesize_clip, take_seed_for
from .text import VARIANTS

FORMAT_VERSION = 1


@dataclass
class CorpusManifest:
    personas: int = 4
    contents: tuple = CONTENTS
    takes: int = 4
    test_takes: int = 2
    pretrain_takes: int = 16
    flip: bool = True
    corpus_seed: int = 0
    min_frames: int = 48
    max_frames: int = 64
    separation_margin: float = 0.25
    layout: dict = field(default_factory=LAYOUT.describe)

    def __post_init__(self):
        self.contents = tuple(self.contents)

    @property
    def persona_ids(self):
        return list(range(1, self.personas + 1))

    def to_dict(self):
        d = asdict(self)
        d["contents"] = list(self.contents)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)

    def plan(self):
        """Yield ``(split, persona_id, content_id, take_index, flipped)`` for every clip."""
        groups = [("pretrain", [NEUTRAL_ID], range(self.pretrain_takes)),
                  ("finetune", self.persona_ids, range(self.takes)),
                  ("test", self.persona_ids, range(self.takes, self.takes + self.test_takes))]
        for split, personas, takes in groups:
            for pid in personas:
                for content in self.contents:
                    for take in takes:
                        yield split, pid, content, take, False
                        if self.flip:
                            yield split, pid, content, take, True


def clip_key(persona_id, content_id, take_index, flipped):
    return f"p{persona_id}_{content_id}_t{take_index}" + ("_m" if flipped else "")


@dataclass
class Corpus:
    manifest: CorpusManifest
    clips: list
    splits: dict          # split name -> list of clip indices

    def split(self, name):
        return [self.clips[i] for i in self.splits.get(name, [])]

    def groups(self, name="finetune"):
        by = defaultdict(list)
        for c in self.split(name):
            by[c.persona_id].append(c)
        return dict(by)

    @property
    def keys(self):
        """String clip keys (as used for blob names), parallel to ``clips``."""
        return [clip_key(pid, content, take, flipped) for _, pid, content, take, flipped in self.manifest.plan()]

    def by_key(self):
        return dict(zip(self.keys, self.clips))

    @property
    def layout(self) -> ChannelLayout:
        return ChannelLayout.from_description(self.manifest.layout)


def generate_corpus(manifest: CorpusManifest) -> Corpus:
    """Render every clip of the manifest in memory."""
    clips, splits, cache = [], defaultdict(list), {}
    for split, pid, content, take, flipped in manifest.plan():
        seed = take_seed_for(manifest.corpus_seed, pid, content, take)
        base_key = (pid, content, take)
        if base_key not in cache:
            rng = np.random.default_rng(seed)
            frames = int(rng.integers(manifest.min_frames, manifest.max_frames + 1))
            variant = int(rng.integers(0, VARIANTS))
            persona = persona_params(manifest.corpus_seed, pid, manifest.separation_margin)
            cache[base_key] = synthesize_clip(persona, content, frames, seed, variant)
        clip = cache[base_key]
        if flipped:
            clip = flip_lr(clip)
        splits[split].append(len(clips))
        clips.append(clip)
    return Corpus(manifest, clips, dict(splits))


def save_corpus(corpus: Corpus, path, overwrite=False):
    records, arrays = [], {}
    index_to_split = {i: s for s, idx in corpus.splits.items() for i in idx}
    plan = list(corpus.manifest.plan())
    for i, (clip, (split, pid, content, take, flipped)) in enumerate(zip(corpus.clips, plan)):
        key = clip_key(pid, content, take, flipped)
        arrays[key] = clip.features
        records.append({
            "key": key, "split": index_to_split[i], "persona_id": clip.persona_id,
            "content_id": clip.content_id, "take_index": take, "take_seed": clip.take_seed,
            "flipped": clip.flipped, "description_variant": clip.description_variant,
            "frames": clip.frames,
        })
    meta = {"format": "persona-motion-corpus", "version": FORMAT_VERSION,
            "manifest": corpus.manifest.to_dict(), "clips": records}
    return write_store(path, meta, arrays, overwrite=overwrite)


def build_corpus(manifest: CorpusManifest, path, overwrite=False) -> Corpus:
    corpus = generate_corpus(manifest)
    save_corpus(corpus, path, overwrite=overwrite)
    return corpus


def load_corpus(path) -> Corpus:
    meta, arrays = read_store(path)
    if meta.get("format") != "persona-motion-corpus":
        raise IntegrityError(f"{path} is not a corpus store")
    manifest = CorpusManifest.from_dict(meta["manifest"])
    layout = ChannelLayout.from_description(manifest.layout)
    clips, splits = [], defaultdict(list)
    for rec in meta["clips"]:
        feats = arrays.get(rec["key"])
        if feats is None:
            raise IntegrityError(f"clip {rec['key']} listed in manifest but has no payload")
        if feats.shape != (rec["frames"], layout.dim):
            raise IntegrityError(f"clip {rec['key']} has shape {feats.shape}, manifest says "
                                 f"({rec['frames']}, {layout.dim})")
        splits[rec["split"]].append(len(clips))
        clips.append(MotionClip(feats, rec["persona_id"], rec["content_id"], rec["take_seed"],
                                rec["description_variant"], rec["flipped"], layout))
    if len(clips) != sum(1 for _ in manifest.plan()):
        raise IntegrityError("clip count disagrees with the manifest plan")
    return Corpus(manifest, clips, dict(splits))
