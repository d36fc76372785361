"""The personalised motion model: frozen clip space + extractor + adapted denoiser."""

from __future__ import annotations

import numpy as np

from .. import nn
from ..adaptation import TextGate, personalized_text_feature
from ..clip_space import ClipModel
from ..data.text import plain
from ..nn import Module, Tensor
from ..persona import PersonaExtractor, PersonaFeatures
from .denoiser import Denoiser


class PromptFeatureCache:
    """Memoised plain sentence features from the frozen text encoder.

    Personalised prompts are looked up by their placeholder-free form.
    """

    def __init__(self, clip: ClipModel):
        self.clip = clip
        self._cache = {}

    def __call__(self, prompts, dtype):
        prompts = [plain(p) for p in prompts]
        missing = list({p.tokens: p for p in prompts if p.tokens not in self._cache}.values())
        if missing:
            for p, f in zip(missing, self.clip.embed_prompts(missing)):
                self._cache[p.tokens] = f
        return Tensor(np.stack([self._cache[p.tokens] for p in prompts]), dtype=dtype)


class PersonalizedModel(Module):
    """Bundles every component used during finetuning and sampling.

    ``use_persona_token`` switches the textual path off entirely (the text
    condition is then the plain sentence feature).
    """

    def __init__(self, clip: ClipModel, denoiser: Denoiser, extractor: PersonaExtractor,
                 use_persona_token=True):
        self.clip = clip
        self.denoiser = denoiser
        self.extractor = extractor
        self.text_gate = TextGate()
        self.use_persona_token = use_persona_token
        self._plain = PromptFeatureCache(clip)

    @classmethod
    def from_pretrained(cls, clip, denoiser, rng, d_proj=32, adapt_kind="self", use_persona_token=True):
        clip.freeze()
        for _, p in denoiser.named_parameters():
            p.freeze()
        denoiser.attach_adapters(rng, adapt_kind)
        denoiser.null_text.unfreeze()
        extractor = PersonaExtractor(denoiser.cfg, rng, d_proj)
        model = cls(clip, denoiser, extractor, use_persona_token)
        if not use_persona_token:
            model.text_gate.gamma.freeze()
        return model

    def frozen_parameters(self):
        return list(self.clip.named_parameters()) + self.denoiser.base_parameters()

    def trainable_parameters(self):
        frozen = {id(p) for _, p in self.frozen_parameters()}
        return [(n, p) for n, p in self.named_parameters() if p.trainable and id(p) not in frozen]

    # conditions -------------------------------------------------------------

    def plain_text(self, prompts):
        return self._plain(prompts, self.denoiser.null_text.dtype)

    def persona_features(self, motion) -> PersonaFeatures:
        return self.extractor.extract(self.clip, motion)

    def text_condition(self, prompts, P_star=None, s_t=None):
        base = self.plain_text(prompts)
        if not self.use_persona_token or P_star is None:
            return base
        return personalized_text_feature(self.clip.text, prompts, P_star, self.text_gate, s_t, base=base)

    def denoise(self, Mt, t, T_star, text_drop=None, V_star=None, v_present=None, s_v=None):
        return self.denoiser(Mt, t, T_star, text_drop, V_star, v_present, s_v)


class PretrainedModel:
    """Sampling interface for the bare pretrained denoiser (no persona paths)."""

    def __init__(self, clip: ClipModel, denoiser: Denoiser):
        self.clip = clip
        self.denoiser = denoiser
        self._plain = PromptFeatureCache(clip)

    def text_condition(self, prompts, P_star=None, s_t=None):
        return self._plain(prompts, self.denoiser.null_text.dtype)

    def denoise(self, Mt, t, T_star, text_drop=None, V_star=None, v_present=None, s_v=None):
        return self.denoiser(Mt, t, T_star, text_drop, None, None, s_v)

    def persona_features(self, motion):
        return None


def clone_pretrained(denoiser: Denoiser, rng):
    """Fresh copy of a pretrained denoiser (without adapters)."""
    copy = Denoiser(denoiser.cfg, rng, denoiser.channels, len(denoiser._time))
    copy.load_state_dict({n: v for n, v in denoiser.state_dict().items()
                          if not n.startswith(("adapters", "visual_gates"))})
    return copy


__all__ = ["PersonalizedModel", "PretrainedModel", "PromptFeatureCache", "clone_pretrained", "nn"]
