"""Command-line entry point: ``persona-motion <stage> [options]``."""

from __future__ import annotations

import argparse
import logging
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import pipeline as pl
from .data import prompt_from_text
from .diffusion import make_schedule, sample
from .errors import ConfigError, PromptError
from .eval import format_rows
from .fusion import CAFConfig, context_aware_fusion
from .runconfig import PRESETS, STAGES, parse_value, canonical_key, resolve
from .storage import write_store

log = logging.getLogger("persona_motion")

# ablation axes whose values change the finetuned weights, not just sampling
TRAINING_AXES = ("lam", "adapt_kind")
ABLATION_AXES = ("s_t", "s_v", "g_t", "g_v", "b", "k", "lam", "adapt_kind")

# flags that map directly onto configuration keys, per subcommand
STAGE_FLAGS = {
    "gen-data": {"personas": int, "contents": int, "takes": int},
    "pretrain-clip": {"epochs": ("clip_epochs", int)},
    "pretrain-diffusion": {"epochs": ("pretrain_epochs", int)},
    "finetune": {"epochs": ("finetune_epochs", int), "lr": float, "lambda": ("lam", float),
                 "adapt-kind": ("adapt_kind", str)},
    "sample": {"k": int, "frames": int},
    "eval": {"protocol": ("protocols", str), "model": ("eval_model", str), "fusion": str, "samples": int},
    "ablate": {"samples": int},
}


def _common(parser):
    parser.add_argument("--run-dir", default="runs/default", type=Path, help="run directory (default: %(default)s)")
    parser.add_argument("--config", type=Path, help="key=value configuration file")
    parser.add_argument("--preset", default="desk", choices=sorted(PRESETS))
    parser.add_argument("--set", dest="assignments", action="append", default=[], metavar="KEY=VALUE",
                        help="override one configuration value (repeatable)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--force", action="store_true", help="overwrite this stage's existing outputs")
    parser.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="persona-motion",
                                     description="Persona-conditioned text-to-motion diffusion on synthetic data.")
    sub = parser.add_subparsers(dest="stage", required=True)
    for stage in STAGES:
        p = sub.add_parser(stage)
        _common(p)
        for flag, spec in STAGE_FLAGS.get(stage, {}).items():
            kind = spec[1] if isinstance(spec, tuple) else spec
            p.add_argument(f"--{flag}", type=kind)
        if stage == "sample":
            p.add_argument("--prompt", required=True)
            p.add_argument("--inputs", required=True,
                           help="comma-separated corpus clip keys or .npy files of shape (frames, channels)")
            p.add_argument("--name", help="output name under samples/ (default: derived from the prompt)")
        if stage == "ablate":
            p.add_argument("--axis", required=True)
            p.add_argument("--values", required=True, help="comma-separated values")
            p.add_argument("--protocol", choices=("SI", "MI"))
    return parser


def resolve_args(args):
    overrides = {}
    for item in args.assignments:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key] = value
    if args.seed is not None:
        overrides["seed"] = args.seed
    for flag, spec in STAGE_FLAGS.get(args.stage, {}).items():
        value = getattr(args, flag.replace("-", "_"), None)
        if value is not None:
            overrides[spec[0] if isinstance(spec, tuple) else flag] = value
    return resolve(args.preset, args.config, overrides)


def _slug(text):
    return re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")[:48] or "sample"


def _load_inputs(spec, corpus):
    by_key = corpus.by_key()
    motions = []
    for item in (s.strip() for s in spec.split(",")):
        if not item:
            continue
        if item in by_key:
            motions.append(by_key[item].features)
        elif item.endswith(".npy") and Path(item).exists():
            motions.append(np.load(item))
        else:
            raise ConfigError(f"input {item!r} is neither a corpus clip key nor an existing .npy file")
    if not motions:
        raise ConfigError("--inputs named no motions")
    return motions


def cmd_sample(cfg, run, args):
    corpus = pl.load_data(run, "sample")
    model = pl.load_personalized(run, cfg, "sample")
    prompt = prompt_from_text(args.prompt)
    if prompt.subject_index is None:
        raise PromptError(f"prompt {args.prompt!r} has no subject ('a', 'someone' or 'the') to personalise")
    motions = _load_inputs(args.inputs, corpus)
    out = run.fresh("sample", args.force, args.name or _slug(args.prompt))
    guidance = pl.guidance_for(cfg, "SI" if len(motions) == 1 else "MI")
    fused = context_aware_fusion(model, motions, prompt, CAFConfig(k=cfg.k), guidance.s_t)
    log.info("CAF weights %s (sum %.6f)", np.round(fused.weights, 4).tolist(), fused.weights.sum())
    motion = sample([prompt], model, make_schedule(cfg.T, cfg.schedule), guidance, pl.stage_rng(cfg, "sample"),
                    frames=cfg.frames, V_star=fused.V_star[None], P_star=fused.P_star[None])[0]
    meta = {"format": "persona-motion-sample", "prompt": prompt.text, "inputs": args.inputs,
            "weights": fused.weights.tolist(), "selected": list(fused.selected),
            "similarities": fused.similarities.tolist()}
    write_store(out, meta, {"motion": motion}, overwrite=True)
    (out / "config.txt").write_text(cfg.to_text())
    print(f"wrote {out} (CAF weights: {', '.join(f'{w:.4f}' for w in fused.weights)})")
    return out


def ablate(cfg, run, axis, values, protocol=None, force=False):
    """One evaluation per axis value with a shared seed; returns the CSV path."""
    axis = canonical_key(axis)
    if axis not in ABLATION_AXES:
        raise ConfigError(f"cannot ablate {axis!r}; choose from {ABLATION_AXES}")
    protocol = protocol or ("MI" if axis == "k" else "SI")
    corpus = pl.load_data(run, "ablate")
    base_model = pl.load_personalized(run, cfg, "ablate") if axis not in TRAINING_AXES else None
    if axis in TRAINING_AXES:
        pl.load_denoiser(run, cfg, "ablate")
    out = run.fresh("ablate", force, axis)
    classifier = pl.train_classifier(cfg, corpus)
    rows, timing = [], []
    for raw in values:
        value = parse_value(axis, raw)
        point = cfg.updated(**{axis: value})
        model = base_model
        if axis in TRAINING_AXES:
            model, _ = pl.personalize_stage(point, corpus, pl.load_clip(run, point, "ablate"),
                                            pl.load_denoiser(run, point, "ablate"))
        start = time.perf_counter()
        (row,), _ = pl.evaluate(point, corpus, model, classifier, [protocol])
        rows.append({"axis": axis, "value": str(value), **row})
        timing.append({"axis": axis, "value": str(value), "wall_time_s": time.perf_counter() - start})
        log.info("ablate %s=%s: %s", axis, value, {k: row[k] for k in ("fid", "rprec3", "pra")})
    path = out / "ablation.csv"
    path.write_text(format_rows(rows, ("axis", "value")))
    pl.write_rows(out / "timing.csv", timing)
    (out / "config.txt").write_text(cfg.to_text())
    return path


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_args(args)
        run = pl.RunDir(args.run_dir)
        if args.stage == "gen-data":
            corpus = pl.run_gen_data(cfg, run, args.force)
            print(f"wrote {len(corpus.clips)} clips to {run.stage('gen-data')}")
        elif args.stage == "pretrain-clip":
            pl.run_pretrain_clip(cfg, run, args.force)
        elif args.stage == "pretrain-diffusion":
            pl.run_pretrain_diffusion(cfg, run, args.force)
        elif args.stage == "finetune":
            pl.run_finetune(cfg, run, args.force)
        elif args.stage == "sample":
            cmd_sample(cfg, run, args)
        elif args.stage == "eval":
            rows = pl.run_eval(cfg, run, args.force)
            sys.stdout.write(format_rows(rows))
        elif args.stage == "ablate":
            path = ablate(cfg, run, args.axis, args.values.split(","), args.protocol, args.force)
            print(f"wrote {path}")
    except (ValueError, KeyError, IndexError, RuntimeError, ArithmeticError, FileExistsError, OSError) as exc:
        print(f"persona-motion {args.stage}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
