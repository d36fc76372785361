import hashlib
import json

import numpy as np
import pytest

from persona_motion.checkpoints import read_checkpoint, save_checkpoint
from persona_motion.clip_space import ClipModel
from persona_motion.diffusion import Denoiser
from persona_motion.errors import IntegrityError
from persona_motion.storage import read_store, write_store


def test_blob_layout_is_raw_little_endian_row_major(tmp_path):
    arr = np.arange(6, dtype=np.float64).reshape(2, 3)
    write_store(tmp_path / "s", {"format": "test"}, {"a": arr, "scalar": np.float32(2.5)})
    raw = (tmp_path / "s" / "blobs" / "a.bin").read_bytes()
    assert raw == np.array([0, 1, 2, 3, 4, 5], dtype="<f4").tobytes()
    manifest, arrays = read_store(tmp_path / "s")
    assert manifest["arrays"]["a"] == {"file": "blobs/a.bin", "shape": [2, 3]}
    assert arrays["scalar"].shape == () and arrays["scalar"] == 2.5


def test_checksum_file_format(tmp_path):
    write_store(tmp_path / "s", {"format": "test"}, {"b": np.ones(2), "a": np.zeros(3)})
    lines = (tmp_path / "s" / "checksums.txt").read_text().splitlines()
    assert [line.split("  ")[1] for line in lines] == ["manifest.json", "blobs/a.bin", "blobs/b.bin"]
    for line in lines:
        digest, rel = line.split("  ")
        assert digest == hashlib.sha256((tmp_path / "s" / rel).read_bytes()).hexdigest()


def test_manifest_is_sorted_and_newline_terminated(tmp_path):
    write_store(tmp_path / "s", {"zeta": 1, "alpha": 2}, {})
    text = (tmp_path / "s" / "manifest.json").read_text()
    assert text.endswith("}\n") and text == json.dumps(json.loads(text), indent=2, sort_keys=True) + "\n"


@pytest.mark.parametrize("damage", ["flip", "truncate", "delete"])
def test_damage_is_detected(tmp_path, damage):
    write_store(tmp_path / "s", {"format": "test"}, {"a": np.ones((4, 4))})
    blob = tmp_path / "s" / "blobs" / "a.bin"
    raw = bytearray(blob.read_bytes())
    if damage == "flip":
        raw[5] ^= 0x80
        blob.write_bytes(bytes(raw))
    elif damage == "truncate":
        blob.write_bytes(bytes(raw[:-4]))
    else:
        blob.unlink()
    with pytest.raises(IntegrityError):
        read_store(tmp_path / "s")


def test_refuses_to_overwrite(tmp_path):
    write_store(tmp_path / "s", {}, {"a": np.ones(1)})
    with pytest.raises(FileExistsError):
        write_store(tmp_path / "s", {}, {"a": np.ones(1)})


def test_checkpoint_round_trip(tmp_path, tiny_cfg, rng):
    den = Denoiser(tiny_cfg, rng, T=10).attach_adapters(rng)
    den.visual_gates[0].gamma.assign(0.25)
    save_checkpoint(tmp_path / "ck", "pretrained", den, {"T": 10})
    meta, state = read_checkpoint(tmp_path / "ck", "pretrained")
    other = Denoiser(tiny_cfg, np.random.default_rng(99), T=10).attach_adapters(np.random.default_rng(98))
    other.load_state_dict(state)
    assert meta == {"T": 10}
    for (n, a), (_, b) in zip(den.named_parameters(), other.named_parameters()):
        np.testing.assert_array_equal(a.data.astype(np.float32), b.data, err_msg=n)


def test_checkpoint_stage_is_checked(tmp_path, tiny_cfg, rng):
    save_checkpoint(tmp_path / "ck", "clip", ClipModel(tiny_cfg, rng))
    with pytest.raises(IntegrityError, match="expected 'finetuned'"):
        read_checkpoint(tmp_path / "ck", "finetuned")


def test_parameter_set_mismatch_is_rejected(tmp_path, tiny_cfg, rng):
    save_checkpoint(tmp_path / "ck", "pretrained", Denoiser(tiny_cfg, rng, T=10))
    _, state = read_checkpoint(tmp_path / "ck", "pretrained")
    with pytest.raises(KeyError):
        Denoiser(tiny_cfg, rng, T=10).attach_adapters(rng).load_state_dict(state)
