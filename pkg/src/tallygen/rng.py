"""Hierarchically derived random streams.

Every stream is keyed by (master_seed, scene_index, stage_label) through
SHA-256, so scene i draws the same numbers no matter how many workers run
the batch or in which order scenes complete.  Python's built-in hash() is
salted per process and must never be used here.
"""

from __future__ import annotations

import hashlib
import math
import random
from typing import Sequence


def stable_hash64(*parts) -> int:
    """Stable 64-bit hash of the stringified parts (cross-platform)."""
    payload = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "big")


class RngStream:
    """Deterministic random stream with an explicit lineage.

    Two streams with equal lineage produce identical sequences; distinct
    stage labels produce independent sequences.  Streams are value-like:
    each scene/stage owns its stream and never shares it across threads.
    """

    __slots__ = ("lineage", "_rng")

    def __init__(self, master_seed: int, scene_index: int, stage_label: str):
        if not stage_label:
            raise ValueError("stage_label must be nonempty")
        self.lineage = (master_seed, scene_index, stage_label)
        self._rng = random.Random(stable_hash64(master_seed, scene_index, stage_label))

    def uniform(self, lo: float, hi: float) -> float:
        if lo > hi:
            raise ValueError(f"invalid range [{lo}, {hi}]")
        return lo + (hi - lo) * self._rng.random()

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer, inclusive on both ends."""
        if lo > hi:
            raise ValueError(f"invalid range [{lo}, {hi}]")
        return self._rng.randint(lo, hi)

    def random(self) -> float:
        return self._rng.random()

    def choice(self, seq: Sequence):
        if not seq:
            raise ValueError("choice from empty sequence")
        return seq[self._rng.randrange(len(seq))]

    def shuffle(self, lst: list) -> None:
        self._rng.shuffle(lst)

    def unit_vector3(self) -> tuple[float, float, float]:
        """Uniform direction on the unit sphere."""
        z = self.uniform(-1.0, 1.0)
        phi = self.uniform(0.0, 2.0 * math.pi)
        r = math.sqrt(max(0.0, 1.0 - z * z))
        return (r * math.cos(phi), r * math.sin(phi), z)

    def quaternion(self) -> tuple[float, float, float, float]:
        """Uniform random rotation as (w, x, y, z), Shoemake's method."""
        u1 = self.random()
        u2 = self.uniform(0.0, 2.0 * math.pi)
        u3 = self.uniform(0.0, 2.0 * math.pi)
        a = math.sqrt(1.0 - u1)
        b = math.sqrt(u1)
        return (b * math.cos(u3), a * math.sin(u2), a * math.cos(u2), b * math.sin(u3))


def derive_stream(master_seed: int, scene_index: int, stage_label: str) -> RngStream:
    """Derive the stream owned by (scene_index, stage_label)."""
    return RngStream(master_seed, scene_index, stage_label)


def sample_uniform(stream: RngStream, lo: float, hi: float) -> float:
    """Uniform real in [lo, hi]; advances the stream."""
    return stream.uniform(lo, hi)


def sample_int(stream: RngStream, lo: int, hi: int) -> int:
    """Uniform integer in [lo, hi], inclusive both ends; advances the stream."""
    return stream.randint(lo, hi)
