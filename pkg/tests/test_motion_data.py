import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from persona_motion.data import (
    CONTENTS,
    LAYOUT,
    NEUTRAL_ID,
    TEMPLATES,
    VOCAB,
    CorpusManifest,
    PersonaParams,
    build_corpus,
    crop,
    describe,
    detokenize,
    flip_lr,
    generate_corpus,
    load_corpus,
    persona_params,
    plain,
    personalize,
    prompt_from_text,
    random_crop,
    synthesize_clip,
    tokenize,
)
from persona_motion.data.motion import PERSONA_RANGES
from persona_motion.data.text import PLACEHOLDER, SUBJECT_WORDS
from persona_motion.errors import (
    BoundsError,
    IntegrityError,
    PromptError,
    RegistryError,
    TemplateError,
    VocabularyError,
)

CH = {name: i for i, name in enumerate(LAYOUT.names)}


@pytest.fixture(scope="module")
def corpus():
    return generate_corpus(CorpusManifest())


def neutral():
    return PersonaParams.neutral()


# synthesis ------------------------------------------------------------------

def test_synthesis_is_deterministic():
    p = persona_params(0, 2)
    a = synthesize_clip(p, "run", 50, take_seed=17)
    b = synthesize_clip(p, "run", 50, take_seed=17)
    assert a.features.tobytes() == b.features.tobytes()


def test_neutral_walk_moves_strictly_forward():
    clip = synthesize_clip(neutral(), "walk-line", 64, take_seed=3)
    assert np.all(np.diff(clip.features[:, CH["root_fwd_pos"]]) > 0)


def test_wave_arm_amplitude_scales_linearly():
    ch = CH["r_shoulder_abduct"]
    base = synthesize_clip(neutral(), "wave", 64, take_seed=5).features[:, ch]
    doubled = synthesize_clip(PersonaParams(1, amplitude_scale=2.0), "wave", 64, take_seed=5).features[:, ch]
    assert np.abs(doubled).max() / np.abs(base).max() == pytest.approx(2.0, abs=1e-6)


def test_unknown_content_is_a_registry_error():
    with pytest.raises(RegistryError):
        synthesize_clip(neutral(), "moonwalk", 40, take_seed=0)


@pytest.mark.parametrize("content", CONTENTS)
def test_contacts_are_binary_and_values_finite(content):
    clip = synthesize_clip(persona_params(0, 1), content, 60, take_seed=9)
    contacts = clip.features[:, list(LAYOUT.contact)]
    assert set(np.unique(contacts)) <= {0.0, 1.0}
    assert np.all(np.isfinite(clip.features))
    assert clip.features.shape == (60, LAYOUT.dim)


def test_persona_params_are_a_pure_function_of_seed_and_id():
    assert persona_params(3, 2) == persona_params(3, 2)
    assert persona_params(3, 2) != persona_params(4, 2)
    assert persona_params(3, NEUTRAL_ID) == neutral()


def test_personas_are_separated_by_the_margin():
    widths = np.array([hi - lo for lo, hi in PERSONA_RANGES.values()])
    vectors = [persona_params(0, pid).vector() for pid in range(9)]
    for i in range(9):
        for j in range(i + 1, 9):
            assert np.max(np.abs(vectors[i] - vectors[j]) / widths) >= 0.25


def test_neutral_is_the_limit_of_persona_parameters():
    target = synthesize_clip(neutral(), "hop", 48, take_seed=1).features
    gaps = []
    for eps in (1e-1, 1e-2, 1e-3):
        p = PersonaParams(1, 1 + eps, 1 + eps, eps, eps, eps)
        gaps.append(np.abs(synthesize_clip(p, "hop", 48, take_seed=1).features - target).max())
    assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 5e-2


def test_nearest_centroid_oracle_separates_personas(corpus):
    """Persona identity is visible in simple per-channel statistics of held-out takes."""
    def stats(clips):
        return np.array([np.concatenate([c.features.mean(0), c.features.std(0)]) for c in clips])

    train, test = corpus.split("finetune"), corpus.split("test")
    xtr, ytr = stats(train), np.array([c.persona_id for c in train])
    xte, yte = stats(test), np.array([c.persona_id for c in test])
    ids = np.unique(ytr)
    centroids = np.array([xtr[ytr == i].mean(0) for i in ids])
    within = np.sqrt(np.mean([(xtr[ytr == i] - centroids[k]) ** 2 for k, i in enumerate(ids)], axis=(0, 1)))
    scale = np.where(within > 1e-9, within, 1.0)
    dist = (((xte[:, None] - centroids[None]) / scale) ** 2).sum(-1)
    accuracy = np.mean(ids[dist.argmin(1)] == yte)
    assert accuracy > 0.9


# flip -----------------------------------------------------------------------

@pytest.mark.parametrize("content", CONTENTS)
def test_flip_is_an_involution(content):
    clip = synthesize_clip(persona_params(0, 3), content, 52, take_seed=11)
    twice = flip_lr(flip_lr(clip))
    assert twice.features.tobytes() == clip.features.tobytes()
    assert twice.flipped == clip.flipped


def test_symmetric_clip_is_a_flip_fixed_point():
    x = np.zeros((40, LAYOUT.dim))
    for left, right in LAYOUT.pairs:
        x[:, left] = x[:, right] = np.linspace(0, 1, 40)
    clip = synthesize_clip(neutral(), "hop", 40, take_seed=0).replace(features=x)
    np.testing.assert_array_equal(flip_lr(clip).features, x)


def test_flip_preserves_total_absolute_value():
    clip = synthesize_clip(persona_params(0, 1), "hop", 60, take_seed=4)
    assert np.abs(flip_lr(clip).features).sum() == pytest.approx(np.abs(clip.features).sum(), rel=1e-12)


def test_flip_swaps_pairs_and_negates_lateral_channels():
    clip = synthesize_clip(persona_params(0, 2), "wave", 50, take_seed=2)
    flipped = flip_lr(clip).features
    for left, right in LAYOUT.pairs:
        np.testing.assert_array_equal(flipped[:, left], clip.features[:, right])
    for ch in LAYOUT.lateral:
        np.testing.assert_array_equal(flipped[:, ch], -clip.features[:, ch])


# crop -----------------------------------------------------------------------

def test_full_crop_is_identity():
    clip = synthesize_clip(neutral(), "run", 56, take_seed=8)
    np.testing.assert_array_equal(crop(clip, 0, 56).features, clip.features)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 8), st.integers(0, 8), st.integers(0, 20))
def test_crops_compose(a, b, extra):
    clip = synthesize_clip(neutral(), "punch", 64, take_seed=6)
    n = 32 + b + extra
    if a + n > 64:
        return
    inner = crop(crop(clip, a, n), b, 32)
    np.testing.assert_array_equal(inner.features, crop(clip, a + b, 32).features)
    assert inner.persona_id == clip.persona_id and inner.content_id == clip.content_id


def test_every_crop_of_a_64_frame_clip_is_long_enough_or_rejected():
    clip = synthesize_clip(neutral(), "walk-circle", 64, take_seed=1)
    for start in range(0, 66):
        for length in range(0, 66):
            try:
                out = crop(clip, start, length)
            except BoundsError:
                assert start + length > 64 or length < 32 or start < 0
            else:
                assert out.frames == length >= 32


def test_random_crop_stays_in_range(rng):
    clip = synthesize_clip(neutral(), "hop", 50, take_seed=1)
    for _ in range(100):
        assert random_crop(clip, 32, rng).frames == 32


# descriptions ---------------------------------------------------------------

def test_walk_line_first_template():
    p = describe("walk-line", 0)
    assert p.text == "a person walks forward"
    assert p.subject_index == 0 and p.placeholder_index is None


def test_personalized_prompt_inserts_placeholder_before_subject():
    base = describe("walk-line", 0)
    p = describe("walk-line", 0, personalized=True)
    assert p.text == f"{PLACEHOLDER} a person walks forward"
    assert p.placeholder_index == 0
    assert p.subject_index == base.subject_index + 1
    assert plain(p) == base


@pytest.mark.parametrize("content", CONTENTS)
def test_templates_round_trip(content):
    for variant in range(8):
        for personalized in (False, True):
            p = describe(content, variant, personalized)
            assert detokenize(tokenize(p.text)) == p.text
            assert tokenize(p.text) == p.tokens
            assert VOCAB[p.tokens[p.subject_index]] in SUBJECT_WORDS
            assert all(0 <= t < len(VOCAB) for t in p.tokens)
    assert len(TEMPLATES[content]) == 8


def test_description_errors():
    with pytest.raises(TemplateError):
        describe("run", 8)
    with pytest.raises(RegistryError):
        describe("swim", 0)
    with pytest.raises(VocabularyError):
        tokenize("a person juggles")
    with pytest.raises(PromptError):
        personalize(prompt_from_text("walks forward"))


# corpus ---------------------------------------------------------------------

def test_default_corpus_counts(corpus):
    assert len(corpus.split("finetune")) == 4 * 6 * 4 * 2 == 192
    assert len(corpus.split("test")) == 4 * 6 * 2 * 2
    assert {c.persona_id for c in corpus.split("pretrain")} == {NEUTRAL_ID}
    assert {c.persona_id for c in corpus.split("finetune")} == {1, 2, 3, 4}


def test_splits_are_disjoint(corpus):
    seen = [set(idx) for idx in corpus.splits.values()]
    assert sum(len(s) for s in seen) == len(set().union(*seen)) == len(corpus.clips)
    finetune = {(c.persona_id, c.content_id, c.take_seed) for c in corpus.split("finetune")}
    test = {(c.persona_id, c.content_id, c.take_seed) for c in corpus.split("test")}
    assert not finetune & test


def test_clip_lengths_respect_the_manifest(corpus):
    frames = [c.frames for c in corpus.clips]
    assert min(frames) >= 48 and max(frames) <= 64


def small_manifest(**kw):
    return CorpusManifest(**{"personas": 2, "contents": ("hop", "wave"), "takes": 2, "test_takes": 1,
                             "pretrain_takes": 2, **kw})


def test_save_load_round_trip_is_bit_exact(tmp_path):
    original = build_corpus(small_manifest(corpus_seed=5), tmp_path / "ds")
    loaded = load_corpus(tmp_path / "ds")
    assert loaded.manifest == original.manifest
    assert loaded.splits == original.splits
    for a, b in zip(original.clips, loaded.clips):
        assert a.features.astype(np.float32).tobytes() == b.features.tobytes()
        assert (a.persona_id, a.content_id, a.take_seed, a.flipped, a.description_variant) == \
               (b.persona_id, b.content_id, b.take_seed, b.flipped, b.description_variant)


def test_four_persona_round_trip(tmp_path):
    original = build_corpus(CorpusManifest(), tmp_path / "ds")
    loaded = load_corpus(tmp_path / "ds")
    assert len(loaded.clips) == len(original.clips) == 480
    assert all(np.array_equal(a.features.astype(np.float32), b.features)
               for a, b in zip(original.clips, loaded.clips))


def test_corrupted_payload_byte_is_detected(tmp_path):
    build_corpus(small_manifest(), tmp_path / "ds")
    blob = sorted((tmp_path / "ds" / "blobs").iterdir())[3]
    raw = bytearray(blob.read_bytes())
    raw[17] ^= 0x01
    blob.write_bytes(bytes(raw))
    with pytest.raises(IntegrityError, match="checksum"):
        load_corpus(tmp_path / "ds")


def test_manifest_file_inconsistency_is_detected(tmp_path):
    build_corpus(small_manifest(), tmp_path / "ds")
    path = tmp_path / "ds" / "manifest.json"
    meta = json.loads(path.read_text())
    meta["clips"][0]["frames"] += 1
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    with pytest.raises(IntegrityError):
        load_corpus(tmp_path / "ds")


def test_existing_directory_is_not_overwritten(tmp_path):
    build_corpus(small_manifest(), tmp_path / "ds")
    with pytest.raises(FileExistsError):
        build_corpus(small_manifest(), tmp_path / "ds")
    build_corpus(small_manifest(), tmp_path / "ds", overwrite=True)


def test_string_keys_index_clips(corpus):
    table = corpus.by_key()
    clip = table["p2_hop_t4_m"]
    assert clip.persona_id == 2 and clip.content_id == "hop" and clip.flipped
    assert any(c is clip for c in corpus.split("test"))
