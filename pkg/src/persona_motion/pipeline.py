"""The five pipeline stages, in memory and on disk.

In-memory functions (``train_*``, ``evaluate``) take and return model
objects. The ``run_*`` wrappers read their inputs from a run directory,
write their outputs to the stage's own subdirectory together with the
resolved configuration, and refuse to overwrite without ``force``.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import nn
from .checkpoints import read_checkpoint, save_checkpoint
from .clip_space import ClipModel, train_clip
from .config import ClipTrainConfig, ModelConfig
from .data import CONTENTS, CorpusManifest, build_corpus, load_corpus
from .diffusion import (
    Denoiser,
    FinetuneConfig,
    GuidanceConfig,
    PersonalizedModel,
    PretrainConfig,
    PretrainedModel,
    finetune,
    make_schedule,
    pretrain_denoiser,
)
from .errors import StageOrderError
from .eval import CSV_COLUMNS, EvalProtocol, PRAClassifier, PRATrainConfig, format_rows, run_protocol, train_pra
from .fusion import CAFConfig
from .persona import CohesionConfig
from .runconfig import RunConfig
from .storage import MANIFEST, ensure_fresh_dir

log = logging.getLogger(__name__)

STAGE_DIRS = {
    "gen-data": "data",
    "pretrain-clip": "clip",
    "pretrain-diffusion": "pretrain",
    "finetune": "finetune",
    "eval": "eval",
    "sample": "samples",
    "ablate": "ablate",
}
_SALT = {"pretrain-clip": 11, "pretrain-diffusion": 12, "finetune": 13, "eval": 14, "sample": 15, "pra": 16}


def stage_rng(cfg: RunConfig, stage):
    return np.random.default_rng([cfg.seed, _SALT[stage]])


def model_config(cfg: RunConfig) -> ModelConfig:
    return ModelConfig(d_model=cfg.d_model, d_txt=cfg.d_model, heads=cfg.heads, denoiser_depth=cfg.denoiser_depth)


def corpus_manifest(cfg: RunConfig) -> CorpusManifest:
    return CorpusManifest(personas=cfg.personas, contents=CONTENTS[: cfg.contents], takes=cfg.takes,
                          test_takes=cfg.test_takes, pretrain_takes=cfg.pretrain_takes, corpus_seed=cfg.seed)


def guidance_for(cfg: RunConfig, setting="SI") -> GuidanceConfig:
    return GuidanceConfig(g_t=cfg.g_t, g_v=cfg.g_v, b=cfg.b if setting == "SI" else cfg.b_mi,
                          s_t=cfg.s_t, s_v=cfg.s_v)


# -- in-memory stages ---------------------------------------------------------

def train_clip_stage(cfg: RunConfig, corpus):
    clip_cfg = ClipTrainConfig(epochs=cfg.clip_epochs, batch_size=cfg.batch, learning_rate=cfg.clip_lr,
                               temperature=cfg.clip_tau)
    rng = stage_rng(cfg, "pretrain-clip")
    model, history = train_clip(corpus.split("pretrain"), clip_cfg, model_config(cfg), rng)
    return model, [{"epoch": e, "loss": loss} for e, loss in history]


def train_denoiser_stage(cfg: RunConfig, corpus, clip: ClipModel):
    clip.freeze()
    pre_cfg = PretrainConfig(epochs=cfg.pretrain_epochs, batch_size=cfg.batch, learning_rate=cfg.pretrain_lr,
                             crop=cfg.frames, drop_text=cfg.drop, geo_weight=cfg.geo_weight)
    schedule = make_schedule(cfg.T, cfg.schedule)
    return pretrain_denoiser(corpus.split("pretrain"), clip, pre_cfg, model_config(cfg), schedule,
                             stage_rng(cfg, "pretrain-diffusion"))


def finetune_config(cfg: RunConfig) -> FinetuneConfig:
    return FinetuneConfig(epochs=cfg.finetune_epochs, batch_size=cfg.finetune_batch, learning_rate=cfg.lr,
                          crop=cfg.frames, drop_text=cfg.drop, drop_visual=cfg.drop, geo_weight=cfg.geo_weight,
                          s_t=cfg.train_s_t, s_v=cfg.train_s_v,
                          cohesion=CohesionConfig(temperature=cfg.tau, weight=cfg.lam))


def personalize_stage(cfg: RunConfig, corpus, clip: ClipModel, denoiser: Denoiser, on_epoch=None):
    """Attach the persona paths to a pretrained denoiser and finetune them."""
    rng = stage_rng(cfg, "finetune")
    model = PersonalizedModel.from_pretrained(clip, denoiser, rng, adapt_kind=cfg.adapt_kind,
                                              use_persona_token=cfg.persona_token)
    history = finetune(model, corpus.split("finetune"), finetune_config(cfg), make_schedule(cfg.T, cfg.schedule),
                       rng, on_epoch)
    return model, history


def train_classifier(cfg: RunConfig, corpus):
    pra_cfg = PRATrainConfig(epochs=cfg.pra_epochs, crop=cfg.frames)
    return train_pra(corpus.split("finetune"), corpus.split("test"), pra_cfg, model_config(cfg),
                     stage_rng(cfg, "pra"))


def evaluate(cfg: RunConfig, corpus, model, classifier, protocols=None):
    """One metrics row per protocol; also returns per-row wall times in seconds."""
    rows, times = [], []
    caf_cfg = CAFConfig(k=cfg.k)
    schedule = make_schedule(cfg.T, cfg.schedule)
    for setting in protocols or cfg.protocol_list:
        protocol = EvalProtocol(setting=setting, inputs_per_set=cfg.inputs_per_set or None,
                                pool_size=cfg.pool_size, samples=cfg.samples, frames=cfg.frames, fusion=cfg.fusion)
        start = time.perf_counter()
        row, _ = run_protocol(protocol, model, corpus, schedule, guidance_for(cfg, setting), classifier,
                              cfg.seed, cfg.to_dict(), caf_cfg)
        rows.append(row)
        times.append(time.perf_counter() - start)
    return rows, times


# -- run directory -----------------------------------------------------------

@dataclass
class RunDir:
    root: Path

    def __post_init__(self):
        self.root = Path(self.root)

    def stage(self, stage) -> Path:
        return self.root / STAGE_DIRS[stage]

    def checkpoint(self, stage) -> Path:
        return self.stage(stage) / "model"

    def require(self, stage, needed_by):
        marker = self.stage(stage) / MANIFEST if stage == "gen-data" else self.checkpoint(stage) / MANIFEST
        if not marker.exists():
            raise StageOrderError(f"{needed_by} needs the '{stage}' stage, which has not been run in {self.root} "
                                  f"(missing {marker}); run `persona-motion {stage}` first")

    def fresh(self, stage, force=False, sub=None) -> Path:
        path = self.stage(stage) if sub is None else self.stage(stage) / sub
        return ensure_fresh_dir(path, force)


def write_text(path: Path, text: str):
    path.write_text(text)
    return path


def write_rows(path: Path, rows, columns=None):
    columns = columns or list(rows[0])
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in row.items() if k in columns})
    return write_text(path, buf.getvalue())


def load_data(run: RunDir, needed_by):
    run.require("gen-data", needed_by)
    return load_corpus(run.stage("gen-data"))


def load_clip(run: RunDir, cfg: RunConfig, needed_by):
    run.require("pretrain-clip", needed_by)
    _, state = read_checkpoint(run.checkpoint("pretrain-clip"), "clip")
    clip = ClipModel(model_config(cfg), np.random.default_rng(0))
    clip.load_state_dict(state)
    clip.freeze()
    return clip


def load_denoiser(run: RunDir, cfg: RunConfig, needed_by):
    run.require("pretrain-diffusion", needed_by)
    _, state = read_checkpoint(run.checkpoint("pretrain-diffusion"), "pretrained")
    denoiser = Denoiser(model_config(cfg), np.random.default_rng(0), T=cfg.T)
    denoiser.load_state_dict(state)
    return denoiser


def load_personalized(run: RunDir, cfg: RunConfig, needed_by):
    clip = load_clip(run, cfg, needed_by)
    denoiser = load_denoiser(run, cfg, needed_by)
    run.require("finetune", needed_by)
    meta, state = read_checkpoint(run.checkpoint("finetune"), "finetuned")
    model = PersonalizedModel.from_pretrained(clip, denoiser, np.random.default_rng(0),
                                              adapt_kind=meta.get("adapt_kind", cfg.adapt_kind),
                                              use_persona_token=meta.get("persona_token", cfg.persona_token))
    model.load_state_dict(state)
    return model


def run_gen_data(cfg: RunConfig, run: RunDir, force=False):
    out = run.fresh("gen-data", force)
    corpus = build_corpus(corpus_manifest(cfg), out, overwrite=True)
    write_text(out / "config.txt", cfg.to_text())
    return corpus


def run_pretrain_clip(cfg: RunConfig, run: RunDir, force=False):
    corpus = load_data(run, "pretrain-clip")
    out = run.fresh("pretrain-clip", force)
    model, history = train_clip_stage(cfg, corpus)
    save_checkpoint(out / "model", "clip", model, {"model": model_config(cfg).__dict__}, overwrite=True)
    write_rows(out / "history.csv", history)
    write_text(out / "config.txt", cfg.to_text())
    return model


def run_pretrain_diffusion(cfg: RunConfig, run: RunDir, force=False):
    corpus = load_data(run, "pretrain-diffusion")
    clip = load_clip(run, cfg, "pretrain-diffusion")
    out = run.fresh("pretrain-diffusion", force)
    denoiser, history = train_denoiser_stage(cfg, corpus, clip)
    save_checkpoint(out / "model", "pretrained", denoiser, {"T": cfg.T, "schedule": cfg.schedule}, overwrite=True)
    write_rows(out / "history.csv", history)
    write_text(out / "config.txt", cfg.to_text())
    return denoiser


def run_finetune(cfg: RunConfig, run: RunDir, force=False):
    corpus = load_data(run, "finetune")
    clip = load_clip(run, cfg, "finetune")
    denoiser = load_denoiser(run, cfg, "finetune")
    out = run.fresh("finetune", force)
    model, history = personalize_stage(cfg, corpus, clip, denoiser)
    meta = {"adapt_kind": cfg.adapt_kind, "persona_token": cfg.persona_token}
    save_checkpoint(out / "model", "finetuned", model, meta, overwrite=True)
    write_rows(out / "history.csv", history)
    write_text(out / "config.txt", cfg.to_text())
    return model, history


def eval_model(cfg: RunConfig, run: RunDir, needed_by):
    if cfg.eval_model == "pretrained":
        return PretrainedModel(load_clip(run, cfg, needed_by), load_denoiser(run, cfg, needed_by))
    return load_personalized(run, cfg, needed_by)


def run_eval(cfg: RunConfig, run: RunDir, force=False):
    corpus = load_data(run, "eval")
    model = eval_model(cfg, run, "eval")
    out = run.fresh("eval", force)
    classifier = train_classifier(cfg, corpus)
    save_checkpoint(out / "pra", "pra", classifier,
                    {"persona_ids": list(classifier.persona_ids),
                     "validation_accuracy": classifier.validation_accuracy}, overwrite=True)
    rows, times = evaluate(cfg, corpus, model, classifier)
    write_text(out / "metrics.csv", format_rows(rows))
    write_rows(out / "timing.csv", [{"protocol": r["protocol"], "wall_time_s": t} for r, t in zip(rows, times)])
    write_text(out / "config.txt", cfg.to_text())
    return rows
