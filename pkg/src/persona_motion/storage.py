"""Directory format shared by datasets and checkpoints.

A store is a directory holding ``manifest.json``, a ``blobs/`` folder of raw
little-endian float32 arrays (row-major) and ``checksums.txt`` listing the
SHA-256 of every other file. See ``docs/dataset-format.md``.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from .errors import IntegrityError

MANIFEST = "manifest.json"
CHECKSUMS = "checksums.txt"
BLOB_DIR = "blobs"
_DTYPE = np.dtype("<f4")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_store(path, manifest: dict, arrays: dict, overwrite=False):
    """Write ``arrays`` (name -> ndarray) and ``manifest`` under ``path``.

    The manifest gains an ``arrays`` entry mapping each name to its blob
    file and shape.
    """
    path = Path(path)
    if path.exists() and any(path.iterdir()) and not overwrite:
        raise FileExistsError(f"{path} already exists; pass overwrite/force to replace it")
    (path / BLOB_DIR).mkdir(parents=True, exist_ok=True)
    entries = {}
    for name, arr in sorted(arrays.items()):
        if "/" in name or name.startswith("."):
            raise ValueError(f"array name {name!r} is not a valid blob file name")
        arr = np.asarray(arr, dtype=_DTYPE, order="C")
        rel = f"{BLOB_DIR}/{name}.bin"
        (path / rel).write_bytes(arr.tobytes(order="C"))
        entries[name] = {"file": rel, "shape": list(arr.shape)}
    manifest = dict(manifest, arrays=entries)
    (path / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    files = [MANIFEST] + [e["file"] for e in entries.values()]
    lines = [f"{_sha256(path / f)}  {f}" for f in files]
    (path / CHECKSUMS).write_text("\n".join(lines) + "\n")
    return path


def read_store(path):
    """Load and verify a store; returns ``(manifest, arrays)``."""
    path = Path(path)
    sums_file = path / CHECKSUMS
    if not sums_file.exists() or not (path / MANIFEST).exists():
        raise IntegrityError(f"{path} is missing {MANIFEST} or {CHECKSUMS}")
    expected = {}
    for line in sums_file.read_text().splitlines():
        if line.strip():
            digest, rel = line.split("  ", 1)
            expected[rel] = digest
    for rel, digest in expected.items():
        f = path / rel
        if not f.exists():
            raise IntegrityError(f"{rel} listed in {CHECKSUMS} but missing")
        if _sha256(f) != digest:
            raise IntegrityError(f"checksum mismatch for {rel}")
    manifest = json.loads((path / MANIFEST).read_text())
    arrays = {}
    for name, entry in manifest.get("arrays", {}).items():
        if entry["file"] not in expected:
            raise IntegrityError(f"{entry['file']} is not covered by {CHECKSUMS}")
        raw = (path / entry["file"]).read_bytes()
        shape = tuple(entry["shape"])
        if len(raw) != _DTYPE.itemsize * int(np.prod(shape)):
            raise IntegrityError(f"{entry['file']} has {len(raw)} bytes, manifest shape {shape}")
        arrays[name] = np.frombuffer(raw, dtype=_DTYPE).reshape(shape).copy()
    return manifest, arrays


def ensure_fresh_dir(path, force=False):
    path = Path(path)
    if path.exists() and any(path.iterdir()) and not force:
        raise FileExistsError(f"run directory {path} already exists; use --force to overwrite")
    os.makedirs(path, exist_ok=True)
    return path
