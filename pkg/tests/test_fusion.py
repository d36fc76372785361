import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from persona_motion.clip_space import ClipModel
from persona_motion.data import describe, persona_params, synthesize_clip
from persona_motion.diffusion import Denoiser, PersonalizedModel
from persona_motion.errors import ConfigError, ContractError, DataError
from persona_motion.fusion import (
    CAFConfig,
    caf,
    context_aware_fusion,
    fuse,
    mean_fusion,
    mean_persona_token,
    persona_inputs,
    topk_softmax,
)

scores = hnp.arrays(np.float64, st.integers(1, 12), elements=st.floats(-1, 1))


# mean token ------------------------------------------------------------------

def test_mean_token_examples(rng):
    p = rng.normal(size=(1, 6))
    np.testing.assert_array_equal(mean_persona_token(p), p[0])
    np.testing.assert_array_equal(mean_persona_token(np.stack([p[0], -p[0]])), np.zeros(6))
    five = rng.normal(size=(5, 6))
    oracle = sum(five[i] for i in range(5)) / 5
    np.testing.assert_allclose(mean_persona_token(five), oracle, atol=1e-7)


def test_mean_token_needs_input():
    with pytest.raises(DataError):
        mean_persona_token(np.zeros((0, 4)))


# weights ---------------------------------------------------------------------

def test_reference_weights():
    w, selected = topk_softmax([0.9, 0.5, 0.1], 2)
    np.testing.assert_allclose(w, [0.5987, 0.4013, 0.0], atol=1e-4)
    assert selected == (0, 1)


def test_equal_scores_give_uniform_weights():
    w, _ = topk_softmax(np.full(4, 0.3), 7)
    np.testing.assert_allclose(w, 0.25, atol=1e-15)


def test_ties_at_the_cut_go_to_the_lower_index():
    w, selected = topk_softmax([0.2, 0.5, 0.5, 0.5], 2)
    assert selected == (1, 2) and w[3] == 0.0


@settings(max_examples=200, deadline=None)
@given(scores, st.integers(1, 15))
def test_weights_are_convex_with_bounded_support(s, k):
    w, selected = topk_softmax(s, k)
    assert np.all(w >= 0) and abs(w.sum() - 1) <= 1e-12
    assert np.count_nonzero(w) <= k and len(selected) == min(k, len(s))
    assert set(np.flatnonzero(w)) <= set(selected)


@settings(max_examples=100, deadline=None)
@given(scores)
def test_k_one_picks_the_argmax(s):
    w, selected = topk_softmax(s, 1)
    assert selected == (int(np.argmax(s)),) and w[selected[0]] == 1.0


@settings(max_examples=100, deadline=None)
@given(scores, st.integers(1, 6), st.randoms(use_true_random=False))
def test_weights_are_permutation_equivariant(s, k, random):
    if len(np.unique(s)) < len(s):
        return  # tie-breaking by index is deliberately not permutation invariant
    perm = np.array(random.sample(range(len(s)), len(s)))
    w, _ = topk_softmax(s, k)
    wp, _ = topk_softmax(s[perm], k)
    np.testing.assert_allclose(wp, w[perm], atol=1e-12)


def test_raising_a_selected_score_raises_its_weight():
    s = np.array([0.9, 0.5, 0.4, 0.1])
    w0, _ = topk_softmax(s, 3)
    s2 = s.copy()
    s2[1] += 0.05
    w1, sel = topk_softmax(s2, 3)
    assert sel == (0, 1, 2) and w1[1] > w0[1]


def test_all_inputs_normalisation_flag():
    s = np.array([0.9, 0.5, 0.1])
    w, _ = topk_softmax(s, 2, normalize_over_all=True)
    np.testing.assert_allclose(w[:2], np.exp(s[:2]) / np.exp(s).sum())
    assert w.sum() < 1 and w[2] == 0


def test_invalid_k():
    with pytest.raises(ConfigError):
        CAFConfig(k=0)


# fuse ------------------------------------------------------------------------

def test_fuse_examples(rng):
    V = [rng.normal(size=(5, 3))]
    P = rng.normal(size=(1, 4))
    v, p = fuse(V, P, [1.0])
    np.testing.assert_array_equal(v, V[0])
    np.testing.assert_array_equal(p, P[0])

    same_v, same_p = fuse([V[0], V[0]], np.stack([P[0], P[0]]), [0.3, 0.7])
    np.testing.assert_allclose(same_v, V[0], atol=1e-12)
    np.testing.assert_allclose(same_p, P[0], atol=1e-12)

    A, B = rng.normal(size=(2, 5, 3))
    pa, pb = rng.normal(size=(2, 4))
    v, p = fuse([A, B], np.stack([pa, pb]), [0.6, 0.4])
    np.testing.assert_allclose(v, 0.6 * A + 0.4 * B, atol=1e-7)
    np.testing.assert_allclose(p, 0.6 * pa + 0.4 * pb, atol=1e-7)


def test_weights_must_sum_to_one(rng):
    with pytest.raises(ContractError):
        fuse([np.zeros((3, 2))] * 2, np.zeros((2, 2)), [0.5, 0.5 + 2e-6])


def test_mixed_lengths_are_centred_and_keep_the_class_row():
    short = np.ones((3, 2))       # class row + 2 frames
    long = np.full((5, 2), 2.0)   # class row + 4 frames
    short[0] = 7.0
    v, _ = fuse([short, long], np.zeros((2, 1)), [0.5, 0.5])
    assert v.shape == (5, 2)
    np.testing.assert_allclose(v[0], [4.5, 4.5])
    np.testing.assert_allclose(v[1:, 0], [1.0, 1.5, 1.5, 1.0])
    cropped, _ = fuse([long], np.zeros((1, 1)), [1.0], length=2)
    assert cropped.shape == (3, 2)


# end to end ------------------------------------------------------------------

@pytest.fixture
def model(tiny_cfg, rng):
    clip = ClipModel(tiny_cfg, rng)
    return PersonalizedModel.from_pretrained(clip, Denoiser(tiny_cfg, rng, T=10), rng, d_proj=8)


@pytest.fixture
def motions():
    return [synthesize_clip(persona_params(0, 1), c, n, take_seed=s).features
            for s, (c, n) in enumerate([("run", 40), ("hop", 36), ("wave", 40), ("punch", 44), ("run", 36)])]


def test_caf_result_contract(model, motions):
    prompt = describe("run", 0, personalized=True)
    res = context_aware_fusion(model, motions, prompt, CAFConfig(k=3))
    assert len(res.selected) == 3 and abs(res.weights.sum() - 1) < 1e-12
    assert np.all(res.weights[[i for i in range(5) if i not in res.selected]] == 0)
    assert np.all(np.abs(res.similarities) <= 1 + 1e-9)
    inputs = persona_inputs(model, motions)
    np.testing.assert_allclose(res.condition.mean_token, inputs.P_stars.mean(0), atol=1e-6)
    assert res.V_star.shape == (45, model.denoiser.cfg.d_model)


def test_caf_k_one_uses_the_most_similar_input(model, motions):
    prompt = describe("hop", 1, personalized=True)
    inputs = persona_inputs(model, motions)
    res = caf(model, inputs, prompt, CAFConfig(k=1))
    best = int(np.argmax(res.similarities))
    assert res.weights[best] == 1.0
    np.testing.assert_array_equal(res.P_star, inputs.P_stars[best].astype(res.P_star.dtype))


def test_caf_is_permutation_equivariant(model, motions):
    prompt = describe("wave", 2, personalized=True)
    perm = [3, 0, 4, 2, 1]
    a = context_aware_fusion(model, motions, prompt)
    b = context_aware_fusion(model, [motions[i] for i in perm], prompt)
    np.testing.assert_allclose(b.similarities, a.similarities[perm], atol=1e-6)
    np.testing.assert_allclose(b.weights, a.weights[perm], atol=1e-6)
    np.testing.assert_allclose(b.V_star, a.V_star, atol=1e-6)
    np.testing.assert_allclose(b.P_star, a.P_star, atol=1e-6)


def test_mean_fusion_weights_every_input(model, motions):
    res = mean_fusion(persona_inputs(model, motions))
    np.testing.assert_allclose(res.weights, 0.2)


def test_no_inputs_is_a_data_error(model):
    with pytest.raises(DataError):
        context_aware_fusion(model, [], describe("run", 0))
