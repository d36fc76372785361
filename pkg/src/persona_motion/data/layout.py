"""Channel layout of the 32-channel motion feature vector.

Rows are frames. Channels are grouped as root trajectory, torso, two mirrored
limb blocks (left then right) and two binary foot contacts. Mirroring swaps
each left channel with its right twin and negates lateral channels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ROOT_CHANNELS = (
    "root_fwd_pos", "root_height", "root_lat_pos",
    "root_fwd_vel", "root_vert_vel", "root_lat_vel",
)
TORSO_CHANNELS = ("spine_pitch", "spine_roll", "head_pitch", "head_yaw")
LIMB_CHANNELS = (
    "shoulder_pitch", "shoulder_abduct", "elbow", "wrist", "hip_pitch",
    "hip_abduct", "knee", "ankle", "hand_height", "foot_height",
)
LATERAL = ("root_lat_pos", "root_lat_vel", "spine_roll", "head_yaw")


@dataclass(frozen=True)
class ChannelLayout:
    names: tuple
    pairs: tuple          # (left_index, right_index)
    lateral: tuple        # indices negated by a mirror
    contact: tuple        # (left_contact, right_contact)

    @property
    def dim(self):
        return len(self.names)

    def index(self, name):
        return self.names.index(name)

    @property
    def permutation(self):
        perm = np.arange(self.dim)
        for a, b in self.pairs:
            perm[a], perm[b] = b, a
        return perm

    @property
    def signs(self):
        signs = np.ones(self.dim, dtype=np.float32)
        signs[list(self.lateral)] = -1.0
        return signs

    def describe(self):
        return {
            "names": list(self.names),
            "pairs": [list(p) for p in self.pairs],
            "lateral": list(self.lateral),
            "contact": list(self.contact),
        }

    @classmethod
    def from_description(cls, desc):
        return cls(
            names=tuple(desc["names"]),
            pairs=tuple(tuple(p) for p in desc["pairs"]),
            lateral=tuple(desc["lateral"]),
            contact=tuple(desc["contact"]),
        )


def default_layout() -> ChannelLayout:
    names = list(ROOT_CHANNELS) + list(TORSO_CHANNELS)
    names += [f"l_{c}" for c in LIMB_CHANNELS]
    names += [f"r_{c}" for c in LIMB_CHANNELS]
    names += ["l_contact", "r_contact"]
    pairs = [(names.index(f"l_{c}"), names.index(f"r_{c}")) for c in LIMB_CHANNELS]
    contact = (names.index("l_contact"), names.index("r_contact"))
    pairs.append(contact)
    lateral = tuple(names.index(c) for c in LATERAL)
    return ChannelLayout(tuple(names), tuple(pairs), lateral, contact)


LAYOUT = default_layout()
D = LAYOUT.dim
