"""Synthetic persona-motion data: clips, descriptions, and corpus storage."""

from .corpus import Corpus, CorpusManifest, build_corpus, clip_key, generate_corpus, load_corpus, save_corpus
from .layout import LAYOUT, ChannelLayout, default_layout
from .motion import (
    CONTENTS,
    FPS,
    MAX_FRAMES,
    MIN_FRAMES,
    NEUTRAL_ID,
    MotionClip,
    PersonaParams,
    crop,
    flip_lr,
    persona_params,
    random_crop,
    synthesize_clip,
    take_seed_for,
)
from .text import (
    PLACEHOLDER_ID,
    TEMPLATES,
    VOCAB,
    PromptText,
    all_prompts,
    describe,
    detokenize,
    personalize,
    plain,
    prompt_from_text,
    tokenize,
)
