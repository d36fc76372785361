import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from persona_motion import nn
from persona_motion.adaptation import (
    ADAPT_KINDS,
    AdaptiveLayer,
    TextGate,
    VisualGate,
    adaptive_layer_forward,
    personalized_text_feature,
)
from persona_motion.clip_space import ClipTextEncoder
from persona_motion.data import describe, prompt_from_text
from persona_motion.errors import ConfigError, PromptError, ShapeError
from persona_motion.nn.gradcheck import max_relative_error


class ProbeEncoder:
    """Text encoder stand-in: 0.2 everywhere for plain prompts, 0.5 with an injection."""

    def __call__(self, prompts, injections=None):
        value = 0.2 if injections is None else 0.5
        return nn.Tensor(np.full((len(prompts), 4), value))


def open_gate(gate_cls, tanh_value, scale):
    gate = gate_cls(scale)
    gate.gamma.assign(np.arctanh(tanh_value))
    return gate


# text path -------------------------------------------------------------------

def test_scalar_probe():
    with nn.precision(np.float64):
        gate = open_gate(TextGate, 0.5, 0.3)
        out = personalized_text_feature(ProbeEncoder(), [describe("run", 0)], np.zeros((1, 4)), gate)
    np.testing.assert_allclose(out.data, 0.275, atol=1e-12)


@pytest.mark.parametrize("gamma, scale", [(0.0, 0.3), (0.8, 0.0)])
def test_closed_gate_returns_the_plain_feature(tiny_cfg, rng, gamma, scale):
    encoder = ClipTextEncoder(tiny_cfg, rng)
    gate = TextGate(scale)
    gate.gamma.assign(gamma)
    prompts = [describe("hop", 0), describe("punch", 4, personalized=True)]
    out = personalized_text_feature(encoder, prompts, rng.normal(size=(2, tiny_cfg.d_txt)), gate)
    base = encoder([describe("hop", 0), describe("punch", 4)])
    np.testing.assert_array_equal(out.data, base.data)


def test_plain_and_personalized_prompts_agree(tiny_cfg, rng):
    encoder = ClipTextEncoder(tiny_cfg, rng)
    gate = open_gate(TextGate, 0.4, 1.0)
    P = rng.normal(size=(1, tiny_cfg.d_txt))
    a = personalized_text_feature(encoder, [describe("wave", 2)], P, gate)
    b = personalized_text_feature(encoder, [describe("wave", 2, personalized=True)], P, gate)
    np.testing.assert_array_equal(a.data, b.data)


def test_prompt_without_subject_is_rejected(tiny_cfg, rng):
    encoder = ClipTextEncoder(tiny_cfg, rng)
    with pytest.raises(PromptError):
        personalized_text_feature(encoder, [prompt_from_text("walks forward")], np.zeros((1, tiny_cfg.d_txt)),
                                  TextGate())


@settings(max_examples=60, deadline=None)
@given(st.floats(-50, 50), st.floats(0, 5))
def test_gate_factor_is_bounded_by_its_scale(gamma, scale):
    gate = VisualGate(scale)
    gate.gamma.assign(gamma)
    assert abs(float(gate.factor().data)) <= scale * (1 + 1e-6)


def test_text_gate_gradient_at_zero_is_nonzero(tiny_cfg, rng):
    with nn.precision(np.float64):
        encoder = ClipTextEncoder(tiny_cfg, rng)
        gate = TextGate(1.0)
        P = nn.Parameter(rng.normal(size=(2, tiny_cfg.d_txt)))
        prompts = [describe("run", 1), describe("hop", 3)]
        target = rng.normal(size=(2, tiny_cfg.d_clip))

        def loss():
            return ((personalized_text_feature(encoder, prompts, P, gate) - target) ** 2).mean()

        loss().backward()
        assert abs(float(gate.gamma.grad)) > 1e-8
        gate.gamma.assign(0.3)
        assert max_relative_error(loss, [gate.gamma, P], max_entries=8) < 1e-3


# visual path -----------------------------------------------------------------

@pytest.fixture(params=ADAPT_KINDS)
def layer(request, rng):
    return AdaptiveLayer(16, 2, rng, kind=request.param)


def test_closed_visual_gate_is_bit_exact_identity(layer, rng):
    z = nn.Tensor(rng.normal(size=(3, 7, 16)))
    V = nn.Tensor(rng.normal(size=(3, 9, 16)))
    out = adaptive_layer_forward(z, V, VisualGate(0.3), layer)
    np.testing.assert_array_equal(out.data, z.data)


def test_output_keeps_stream_shape(layer, rng):
    z = nn.Tensor(rng.normal(size=(2, 5, 16)))
    out = layer(z, nn.Tensor(rng.normal(size=(2, 11, 16))), open_gate(VisualGate, 0.5, 1.0))
    assert out.shape == z.shape and np.all(np.isfinite(out.data))


def test_empty_context_is_self_attention_over_z(rng):
    layer = AdaptiveLayer(16, 2, rng, kind="self")
    z = nn.Tensor(rng.normal(size=(2, 5, 16)))
    gate = open_gate(VisualGate, 0.5, 1.0)
    expected = z.data + 0.5 * layer.attn(layer.norm(z)).data
    for empty in (None, nn.Tensor(np.zeros((2, 0, 16)))):
        np.testing.assert_allclose(layer(z, empty, gate).data, expected, atol=1e-6)


def test_absent_context_matches_empty_context(rng):
    layer = AdaptiveLayer(16, 2, rng, kind="self")
    z = nn.Tensor(rng.normal(size=(2, 5, 16)))
    V = nn.Tensor(rng.normal(size=(2, 6, 16)))
    gate = open_gate(VisualGate, 0.5, 1.0)
    masked = layer(z, V, gate, v_present=np.array([False, True]))
    np.testing.assert_allclose(masked.data[0], layer(z, None, gate).data[0], atol=1e-6)
    assert np.abs(masked.data[1] - layer(z, None, gate).data[1]).max() > 1e-4


def test_stream_depends_on_persona_sequence_when_open(layer, rng):
    with nn.precision(np.float64):
        z = nn.Tensor(rng.normal(size=(1, 4, 16)))
        V = rng.normal(size=(1, 6, 16))
        gate = open_gate(VisualGate, 0.5, 1.0)
        base = layer(z, nn.Tensor(V), gate).data
        bumped = V.copy()
        bumped[0, 2, 3] += 1e-4
        delta = np.abs(layer(z, nn.Tensor(bumped), gate).data - base)
    assert delta.max() > 0 and np.all(np.isfinite(delta))


def test_width_mismatch_is_a_shape_error(layer, rng):
    with pytest.raises(ShapeError):
        layer(nn.Tensor(rng.normal(size=(1, 4, 16))), nn.Tensor(rng.normal(size=(1, 3, 8))), VisualGate())


def test_unknown_adapter_kind(rng):
    with pytest.raises(ConfigError):
        AdaptiveLayer(16, 2, rng, kind="film")


def test_visual_gradients_pass_finite_differences(rng):
    with nn.precision(np.float64):
        layer = AdaptiveLayer(8, 2, rng, kind="self")
        gate = VisualGate(1.0)
        z = nn.Parameter(rng.normal(size=(1, 3, 8)))
        V = nn.Parameter(rng.normal(size=(1, 4, 8)))

        def loss():
            return (layer(z, V, gate) ** 2).mean()

        loss().backward()
        assert abs(float(gate.gamma.grad)) > 1e-8
        gate.gamma.assign(0.4)
        assert max_relative_error(loss, [gate.gamma, V, *layer.parameters()], max_entries=5) < 1e-3
