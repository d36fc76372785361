"""Templated motion descriptions and the word-level vocabulary."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import PromptError, RegistryError, TemplateError, VocabularyError
from .motion import CONTENTS

PAD, START, PLACEHOLDER = "<pad>", "<s>", "[P]"
SUBJECT_WORDS = ("a", "someone", "the")

TEMPLATES = {
    "walk-line": (
        "a person walks forward",
        "someone walks straight ahead",
        "a person is walking in a straight line",
        "the person walks forward at a steady pace",
        "a person takes several steps forward",
        "someone is walking forward",
        "a person walks ahead swinging the arms",
        "the person walks straight forward and keeps going",
    ),
    "walk-circle": (
        "a person walks in a circle",
        "someone walks around in a circle",
        "a person is walking in a circle",
        "the person walks around turning to the left",
        "a person walks in a circle at a steady pace",
        "someone is walking around in a circle",
        "a person walks in a circle swinging the arms",
        "the person keeps turning while walking around",
    ),
    "run": (
        "a person runs forward",
        "someone runs straight ahead",
        "a person is running in a straight line",
        "the person runs forward quickly",
        "a person jogs forward",
        "someone is running forward",
        "a person runs ahead swinging the arms",
        "the person runs forward and keeps going",
    ),
    "hop": (
        "a person hops forward",
        "someone hops on one leg",
        "a person is hopping forward on the left leg",
        "the person hops forward several times",
        "a person jumps forward on one leg",
        "someone is hopping forward",
        "a person hops ahead on one leg",
        "the person hops on one leg and keeps going",
    ),
    "wave": (
        "a person waves",
        "someone waves the right hand",
        "a person is waving a hand",
        "the person raises the right arm and waves",
        "a person waves hello",
        "someone is waving",
        "a person stands and waves the right hand",
        "the person waves the hand several times",
    ),
    "punch": (
        "a person punches",
        "someone throws punches",
        "a person is punching forward",
        "the person punches with both arms",
        "a person throws several punches",
        "someone is punching",
        "a person stands and punches forward",
        "the person punches forward several times",
    ),
}
VARIANTS = 8


def _build_vocab():
    words = sorted({w for ts in TEMPLATES.values() for t in ts for w in t.split()})
    return (PAD, START, PLACEHOLDER, *words)


VOCAB = _build_vocab()
TOKEN_ID = {w: i for i, w in enumerate(VOCAB)}
PAD_ID, START_ID, PLACEHOLDER_ID = 0, 1, 2


@dataclass(frozen=True)
class PromptText:
    tokens: tuple
    subject_index: int | None
    text: str
    content_id: str | None = None
    placeholder_index: int | None = None

    @property
    def personalized(self):
        return self.placeholder_index is not None

    def __len__(self):
        return len(self.tokens)


def tokenize(text: str) -> tuple:
    ids = []
    for word in text.split():
        if word != PLACEHOLDER:
            word = word.lower()
        if word not in TOKEN_ID:
            raise VocabularyError(f"word {word!r} is not in the vocabulary")
        ids.append(TOKEN_ID[word])
    return tuple(ids)


def detokenize(tokens) -> str:
    return " ".join(VOCAB[t] for t in tokens)


def prompt_from_text(text: str, content_id=None) -> PromptText:
    """Tokenize free text; the subject is the first subject-phrase word."""
    tokens = tokenize(text)
    words = [VOCAB[t] for t in tokens]
    subject = next((i for i, w in enumerate(words) if w in SUBJECT_WORDS), None)
    placeholder = words.index(PLACEHOLDER) if PLACEHOLDER in words else None
    return PromptText(tokens, subject, detokenize(tokens), content_id, placeholder)


def personalize(prompt: PromptText) -> PromptText:
    """Insert the placeholder token immediately before the subject phrase."""
    if prompt.personalized:
        return prompt
    if prompt.subject_index is None:
        raise PromptError(f"prompt {prompt.text!r} has no subject to personalise")
    i = prompt.subject_index
    tokens = prompt.tokens[:i] + (PLACEHOLDER_ID,) + prompt.tokens[i:]
    return PromptText(tokens, i + 1, detokenize(tokens), prompt.content_id, i)


def plain(prompt: PromptText) -> PromptText:
    """Remove the placeholder token, undoing ``personalize``."""
    if not prompt.personalized:
        return prompt
    i = prompt.placeholder_index
    tokens = prompt.tokens[:i] + prompt.tokens[i + 1:]
    subject = prompt.subject_index
    if subject is not None and subject > i:
        subject -= 1
    return PromptText(tokens, subject, detokenize(tokens), prompt.content_id, None)


def describe(content_id: str, variant: int, personalized: bool = False) -> PromptText:
    if content_id not in TEMPLATES:
        raise RegistryError(f"unknown content {content_id!r}")
    if not 0 <= variant < VARIANTS:
        raise TemplateError(f"variant {variant} outside 0..{VARIANTS - 1}")
    prompt = prompt_from_text(TEMPLATES[content_id][variant], content_id)
    return personalize(prompt) if personalized else prompt


def all_prompts():
    return [describe(c, v) for c in CONTENTS for v in range(VARIANTS)]
