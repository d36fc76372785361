"""Model checkpoints: a store whose arrays are a module's parameters."""

from __future__ import annotations

from .errors import IntegrityError
from .storage import read_store, write_store

FORMAT = "persona-motion-checkpoint"
STAGES = ("clip", "pretrained", "finetuned", "pra")


def save_checkpoint(path, stage, module, meta=None, overwrite=False):
    """Write ``module``'s parameters plus a stage tag and free-form ``meta``."""
    if stage not in STAGES:
        raise ValueError(f"unknown checkpoint stage {stage!r}")
    manifest = {"format": FORMAT, "stage": stage, "meta": meta or {}}
    return write_store(path, manifest, module.state_dict(), overwrite=overwrite)


def read_checkpoint(path, stage):
    """Return ``(meta, state)``; the stored stage must equal ``stage``."""
    manifest, arrays = read_store(path)
    if manifest.get("format") != FORMAT:
        raise IntegrityError(f"{path} is not a checkpoint")
    if manifest.get("stage") != stage:
        raise IntegrityError(f"{path} holds a {manifest.get('stage')!r} checkpoint, expected {stage!r}")
    return manifest["meta"], arrays
