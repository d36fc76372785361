"""Flat run configuration, key=value config files, and presets."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .adaptation import ADAPT_KINDS
from .errors import ConfigError

STAGES = ("gen-data", "pretrain-clip", "pretrain-diffusion", "finetune", "sample", "eval", "ablate")

ALIASES = {"lambda": "lam", "λ": "lam", "batch_size": "batch", "temperature": "tau"}


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    # corpus
    personas: int = 4
    contents: int = 6
    takes: int = 4
    test_takes: int = 2
    pretrain_takes: int = 16
    # model width
    d_model: int = 64
    heads: int = 4
    denoiser_depth: int = 4
    # clip space
    clip_epochs: int = 40
    clip_lr: float = 1e-3
    clip_tau: float = 0.1
    # diffusion pretraining
    T: int = 50
    schedule: str = "cosine"
    batch: int = 64
    pretrain_epochs: int = 60
    pretrain_lr: float = 1e-3
    geo_weight: float = 1.0
    # personalisation finetuning
    finetune_epochs: int = 40
    finetune_batch: int = 16
    lr: float = 2e-3
    lam: float = 1e-2
    tau: float = 0.1
    drop: float = 0.1
    train_s_t: float = 1.0
    train_s_v: float = 1.0
    adapt_kind: str = "self"
    persona_token: bool = True
    # inference
    s_t: float = 0.3
    s_v: float = 0.3
    g_t: float = 10.0
    g_v: float = 15.0
    b: float = 0.7
    b_mi: float = 0.5
    k: int = 5
    frames: int = 32
    # evaluation
    protocols: str = "SI,MI"
    samples: int = 96
    pool_size: int = 32
    inputs_per_set: int = 0
    fusion: str = "caf"
    eval_model: str = "finetuned"
    pra_epochs: int = 20

    def __post_init__(self):
        if self.adapt_kind not in ADAPT_KINDS:
            raise ConfigError(f"adapt_kind must be one of {ADAPT_KINDS}, got {self.adapt_kind!r}")
        if self.eval_model not in ("finetuned", "pretrained"):
            raise ConfigError(f"eval_model must be 'finetuned' or 'pretrained', got {self.eval_model!r}")
        if self.fusion not in ("caf", "mean"):
            raise ConfigError(f"fusion must be 'caf' or 'mean', got {self.fusion!r}")
        bad = [p for p in self.protocol_list if p not in ("SI", "MI")]
        if bad:
            raise ConfigError(f"unknown protocols {bad}")
        for name in ("k", "batch", "finetune_batch", "T", "personas", "contents", "takes", "frames"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")

    @property
    def protocol_list(self):
        return [p.strip() for p in self.protocols.split(",") if p.strip()]

    def updated(self, **changes):
        return replace(self, **changes)

    def to_text(self) -> str:
        return "".join(f"{k}={_format(v)}\n" for k, v in asdict(self).items())

    def to_dict(self):
        return asdict(self)


# The values used in the original large-scale setting; far beyond a CPU budget.
PRESETS = {
    "desk": {},
    "full-scale": {"pretrain_epochs": 500, "finetune_epochs": 500, "finetune_batch": 64, "lr": 1e-4},
}

_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _format(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def canonical_key(key: str) -> str:
    key = key.strip().replace("-", "_")
    key = ALIASES.get(key, key)
    if key not in _TYPES:
        raise ConfigError(f"unknown configuration key {key!r}")
    return key


def parse_value(key: str, raw):
    kind = _TYPES[key]
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if kind in ("bool", bool):
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind in ("int", int):
            return int(text)
        if kind in ("float", float):
            return float(text)
    except ValueError:
        raise ConfigError(f"cannot read {key}={text!r} as {kind}") from None
    return text


def parse_assignments(lines, source="<config>"):
    """Read ``key=value`` lines (``#`` starts a comment) into a dict of typed values."""
    out = {}
    for number, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{number}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        key = canonical_key(key)
        out[key] = parse_value(key, value)
    return out


def load_config_file(path) -> dict:
    path = Path(path)
    return parse_assignments(path.read_text().splitlines(), str(path))


def resolve(preset="desk", config_file=None, overrides=None) -> RunConfig:
    """Defaults, then the preset, then the config file, then explicit overrides."""
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    values = dict(PRESETS[preset])
    if config_file is not None:
        values.update(load_config_file(config_file))
    for key, value in (overrides or {}).items():
        key = canonical_key(key)
        values[key] = parse_value(key, value)
    return RunConfig(**values)
