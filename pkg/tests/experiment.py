"""Memoised in-process pipeline runs shared by the slow tests.

Every artefact is computed at most once per test session. The stages call
the same functions as the command-line tool, so results match what
``persona-motion`` would write for the same seed.
"""

from __future__ import annotations

import copy
import time
from functools import cached_property

from persona_motion import pipeline as pl
from persona_motion.data import generate_corpus
from persona_motion.diffusion import PretrainedModel
from persona_motion.runconfig import RunConfig

VARIANTS = {
    "full": {},
    "visual-only": {"persona_token": False, "lam": 0.0},
    "no-lpc": {"lam": 0.0},
}


class SeedRun:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.seconds = {}
        self._finetuned = {}
        self._histories = {}
        self._metrics = {}

    def _timed(self, name, fn):
        start = time.perf_counter()
        out = fn()
        self.seconds[name] = time.perf_counter() - start
        return out

    @cached_property
    def corpus(self):
        return self._timed("gen-data", lambda: generate_corpus(pl.corpus_manifest(self.cfg)))

    @cached_property
    def clip(self):
        model, _ = self._timed("pretrain-clip", lambda: pl.train_clip_stage(self.cfg, self.corpus))
        model.freeze()
        self.clip_snapshot = {n: p.data.copy() for n, p in model.named_parameters()}
        return model

    @property
    def pretrained_denoiser(self):
        """The untouched pretrained denoiser; do not mutate."""
        return self._pretrained[0]

    @cached_property
    def _pretrained(self):
        return self._timed("pretrain-diffusion", lambda: pl.train_denoiser_stage(self.cfg, self.corpus, self.clip))

    @property
    def pretrain_history(self):
        return self._pretrained[1]

    def denoiser(self):
        """A private copy of the pretrained denoiser (finetuning mutates it)."""
        return copy.deepcopy(self._pretrained[0])

    @cached_property
    def classifier(self):
        return self._timed("pra", lambda: pl.train_classifier(self.cfg, self.corpus))

    def variant_cfg(self, variant):
        return self.cfg.updated(**VARIANTS[variant])

    def finetuned(self, variant="full"):
        if variant not in self._finetuned:
            cfg = self.variant_cfg(variant)
            model, history = self._timed(f"finetune-{variant}",
                                         lambda: pl.personalize_stage(cfg, self.corpus, self.clip, self.denoiser()))
            self._finetuned[variant], self._histories[variant] = model, history
        return self._finetuned[variant]

    def history(self, variant="full"):
        self.finetuned(variant)
        return self._histories[variant]

    def metrics(self, variant="full", protocol="SI", fusion="caf"):
        key = (variant, protocol, fusion)
        if key not in self._metrics:
            if variant == "baseline":
                cfg, model = self.cfg, PretrainedModel(self.clip, self.denoiser())
            else:
                cfg, model = self.variant_cfg(variant).updated(fusion=fusion), self.finetuned(variant)
            rows, _ = self._timed(f"eval-{'-'.join(key)}",
                                  lambda: pl.evaluate(cfg, self.corpus, model, self.classifier, [protocol]))
            self._metrics[key] = rows[0]
        return self._metrics[key]


class Experiments:
    def __init__(self, **overrides):
        self.overrides = overrides
        self._runs = {}

    def __call__(self, seed) -> SeedRun:
        if seed not in self._runs:
            self._runs[seed] = SeedRun(RunConfig(seed=seed, **self.overrides))
        return self._runs[seed]
