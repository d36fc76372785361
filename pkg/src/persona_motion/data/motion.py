"""Motion clips, the persona-conditioned synthesizer, mirroring and cropping."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import BoundsError, RegistryError
from .layout import LAYOUT, ChannelLayout

CONTENTS = ("walk-line", "walk-circle", "run", "hop", "wave", "punch")
NEUTRAL_ID = 0
FPS = 20.0
MIN_FRAMES = 32
MAX_FRAMES = 64

# Per-parameter sampling ranges for non-neutral personas.
PERSONA_RANGES = {
    "amplitude_scale": (0.6, 1.5),
    "frequency_scale": (0.7, 1.4),
    "lean": (-0.35, 0.35),
    "arm_bias": (-0.4, 0.4),
    "tempo_jitter": (0.0, 0.3),
}


@dataclass(frozen=True)
class PersonaParams:
    persona_id: int
    amplitude_scale: float = 1.0
    frequency_scale: float = 1.0
    lean: float = 0.0
    arm_bias: float = 0.0
    tempo_jitter: float = 0.0

    def vector(self):
        return np.array([getattr(self, k) for k in PERSONA_RANGES])

    @classmethod
    def neutral(cls, persona_id=NEUTRAL_ID):
        return cls(persona_id)


@dataclass
class MotionClip:
    features: np.ndarray
    persona_id: int
    content_id: str
    take_seed: int
    description_variant: int = 0
    flipped: bool = False
    layout: ChannelLayout = dataclasses.field(default=LAYOUT, repr=False)

    @property
    def frames(self):
        return self.features.shape[0]

    @property
    def key(self):
        return (self.persona_id, self.content_id, self.take_seed, self.flipped)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def _separation(a, b):
    """Largest per-parameter gap, in units of each parameter's range."""
    widths = np.array([hi - lo for lo, hi in PERSONA_RANGES.values()])
    return float(np.max(np.abs(a - b) / widths))


@lru_cache(maxsize=None)
def _persona_table(corpus_seed, count, margin):
    rng = np.random.default_rng([corpus_seed, 0x5E50])
    chosen = [PersonaParams.neutral().vector()]
    for _ in range(count):
        for _attempt in range(10_000):
            draw = np.array([rng.uniform(lo, hi) for lo, hi in PERSONA_RANGES.values()])
            # lean and arm_bias carry the most recognisable signal; keep them apart
            statics = np.array([np.abs(draw[2:4] - c[2:4]).max() for c in chosen])
            if all(_separation(draw, c) >= margin for c in chosen) and statics.min() >= 0.12:
                chosen.append(draw)
                break
        else:
            raise RuntimeError("could not place persona with the requested separation margin")
    return tuple(tuple(v) for v in chosen)


def persona_params(corpus_seed: int, persona_id: int, margin: float = 0.25) -> PersonaParams:
    """Persona parameters as a pure function of ``(corpus_seed, persona_id)``.

    Id 0 is the neutral persona. Ids are placed sequentially by rejection
    sampling so every pair differs by at least ``margin`` (as a fraction of
    the parameter range) in some parameter.
    """
    if persona_id == NEUTRAL_ID:
        return PersonaParams.neutral()
    values = _persona_table(int(corpus_seed), int(persona_id), float(margin))[persona_id]
    return PersonaParams(int(persona_id), *values)


def take_seed_for(corpus_seed, persona_id, content_id, take_index):
    content = CONTENTS.index(content_id)
    seq = np.random.SeedSequence([int(corpus_seed), int(persona_id), content, int(take_index)])
    return int(seq.generate_state(1)[0])


def _take_variation(take_seed):
    rng = np.random.default_rng(take_seed)
    return {
        "phase": rng.uniform(0.0, 2 * np.pi),
        "freq": rng.uniform(0.95, 1.05),
        "amp": rng.uniform(0.95, 1.05),
    }


def _phase(frames, base_hz, persona, take):
    t = np.arange(frames) / FPS
    warp_hz = 0.7
    warped = t + persona.tempo_jitter * np.sin(2 * np.pi * warp_hz * t) / (2 * np.pi * warp_hz)
    return 2 * np.pi * base_hz * persona.frequency_scale * take["freq"] * warped + take["phase"]


def _set(out, name, values):
    out[:, LAYOUT.index(name)] = values


def _gait(out, phi, amp, stride, arm_swing, knee_lift):
    s = np.sin(phi)
    for side, sign in (("l", 1.0), ("r", -1.0)):
        ss = sign * s
        _set(out, f"{side}_hip_pitch", amp * stride * ss)
        _set(out, f"{side}_knee", amp * knee_lift * np.maximum(0.0, ss) + 0.1)
        _set(out, f"{side}_ankle", amp * 0.2 * np.cos(phi) * sign)
        _set(out, f"{side}_foot_height", amp * 0.15 * np.maximum(0.0, ss))
        _set(out, f"{side}_shoulder_pitch", -amp * arm_swing * ss)
        _set(out, f"{side}_hand_height", 0.8 - amp * 0.05 * ss)


def _integrate(out, vel_name, pos_name):
    vel = out[:, LAYOUT.index(vel_name)]
    out[:, LAYOUT.index(pos_name)] = np.concatenate([[0.0], np.cumsum(vel[:-1])])


def synthesize_clip(persona: PersonaParams, content_id: str, frames: int, take_seed: int,
                    description_variant: int = 0) -> MotionClip:
    """Render one clip of ``content_id`` performed in the style of ``persona``."""
    if content_id not in CONTENTS:
        raise RegistryError(f"unknown content {content_id!r}; expected one of {CONTENTS}")
    take = _take_variation(take_seed)
    amp = persona.amplitude_scale * take["amp"]
    out = np.zeros((frames, LAYOUT.dim))
    _set(out, "root_height", 0.9)
    for side in "lr":
        _set(out, f"{side}_elbow", 0.2)
        _set(out, f"{side}_hand_height", 0.8)
    contact_l = np.ones(frames)
    contact_r = np.ones(frames)

    if content_id in ("walk-line", "walk-circle", "run"):
        running = content_id == "run"
        phi = _phase(frames, 1.5 if running else 1.0, persona, take)
        s = np.sin(phi)
        _gait(out, phi, amp, 0.8 if running else 0.5, 0.5 if running else 0.3, 0.9 if running else 0.4)
        speed = (0.09 if running else 0.045) * persona.frequency_scale * take["freq"]
        fwd_vel = speed * (1.0 + 0.2 * np.cos(2 * phi))
        _set(out, "root_height", 0.9 + amp * (0.05 if running else 0.02) * np.cos(2 * phi))
        if running:
            _set(out, "spine_pitch", 0.1)
            for side in "lr":
                _set(out, f"{side}_elbow", 0.9)
            contact_l = (s < -0.3).astype(float)
            contact_r = (s > 0.3).astype(float)
        else:
            contact_l = (s <= 0).astype(float)
            contact_r = (s >= 0).astype(float)
        if content_id == "walk-circle":
            heading = np.concatenate([[0.0], np.cumsum(np.full(frames - 1, 0.06))])
            _set(out, "root_fwd_vel", fwd_vel * np.cos(heading))
            _set(out, "root_lat_vel", fwd_vel * np.sin(heading))
            _set(out, "spine_roll", 0.08)
            _set(out, "head_yaw", 0.2)
        else:
            _set(out, "root_fwd_vel", fwd_vel)
    elif content_id == "hop":
        phi = _phase(frames, 1.2, persona, take)
        s = np.sin(phi)
        air = np.maximum(0.0, s)
        _set(out, "root_height", 0.9 + amp * 0.15 * air)
        _set(out, "root_fwd_vel", 0.04 * persona.frequency_scale * take["freq"] * (1.0 + s))
        _set(out, "l_knee", amp * 0.5 * (1.0 - s) / 2 + 0.1)
        _set(out, "l_ankle", amp * 0.3 * np.cos(phi))
        _set(out, "l_foot_height", amp * 0.15 * air)
        _set(out, "r_hip_pitch", 0.5 + amp * 0.1 * s)
        _set(out, "r_knee", 1.0)
        _set(out, "r_foot_height", 0.3 + amp * 0.15 * air)
        for side in "lr":
            _set(out, f"{side}_shoulder_abduct", amp * 0.3 * air)
        _set(out, "spine_pitch", 0.05)
        contact_l = (s <= 0).astype(float)
        contact_r = np.zeros(frames)
    elif content_id == "wave":
        phi = _phase(frames, 1.6, persona, take)
        s = np.sin(phi)
        _set(out, "r_shoulder_pitch", 1.4)
        _set(out, "r_shoulder_abduct", amp * 0.5 * s)
        _set(out, "r_elbow", 0.6 + amp * 0.2 * np.cos(phi))
        _set(out, "r_wrist", amp * 0.4 * s)
        _set(out, "r_hand_height", 1.6 + amp * 0.05 * np.cos(phi))
        _set(out, "head_yaw", -0.1)
    elif content_id == "punch":
        phi = _phase(frames, 0.8, persona, take)
        s = np.sin(phi)
        for side, sign in (("l", 1.0), ("r", -1.0)):
            ext = np.maximum(0.0, sign * s)
            _set(out, f"{side}_shoulder_pitch", 0.6 + amp * 0.8 * ext)
            _set(out, f"{side}_elbow", 1.4 - amp * 1.1 * ext)
            _set(out, f"{side}_hand_height", 1.2 + amp * 0.1 * ext)
        _set(out, "spine_roll", amp * 0.1 * s)
        _set(out, "spine_pitch", 0.1)

    # persona static offsets
    out[:, LAYOUT.index("spine_pitch")] += persona.lean
    out[:, LAYOUT.index("head_pitch")] += 0.5 * persona.lean
    for side in "lr":
        out[:, LAYOUT.index(f"{side}_shoulder_abduct")] += persona.arm_bias
        out[:, LAYOUT.index(f"{side}_elbow")] += 0.5 * persona.arm_bias

    vert = np.diff(out[:, LAYOUT.index("root_height")], append=out[-1, LAYOUT.index("root_height")])
    _set(out, "root_vert_vel", vert)
    _integrate(out, "root_fwd_vel", "root_fwd_pos")
    _integrate(out, "root_lat_vel", "root_lat_pos")
    _set(out, "l_contact", contact_l)
    _set(out, "r_contact", contact_r)
    return MotionClip(out.astype(np.float32), persona.persona_id, content_id, int(take_seed),
                      description_variant)


def flip_lr(clip: MotionClip) -> MotionClip:
    """Mirror a clip: swap left/right channel pairs and negate lateral channels."""
    layout = clip.layout
    feats = clip.features[:, layout.permutation] * layout.signs.astype(clip.features.dtype)
    return clip.replace(features=feats, flipped=not clip.flipped)


def crop(clip: MotionClip, start: int, length: int, min_frames: int = MIN_FRAMES) -> MotionClip:
    if start < 0 or length < min_frames or start + length > clip.frames:
        raise BoundsError(
            f"crop [{start}, {start + length}) invalid for clip of {clip.frames} frames "
            f"(min length {min_frames})")
    return clip.replace(features=clip.features[start:start + length])


def random_crop(clip: MotionClip, length: int, rng) -> MotionClip:
    start = int(rng.integers(0, clip.frames - length + 1))
    return crop(clip, start, length)
