"""Seeded xoshiro256** generator shared by the Python and compiled paths.

Both paths draw doubles as ``(x >> 11) * 2**-53`` from the same 256-bit
state, so a trajectory stepped in pure Python and one stepped by the
compiled kernels agree bit for bit. Seeds are expanded with splitmix64.
"""

from __future__ import annotations

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
_TWO_M53 = 1.0 / 9007199254740992.0


def splitmix64(x: int) -> tuple[int, int]:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return x, z ^ (z >> 31)


def seed_state(seed: int) -> np.ndarray:
    x = int(seed) & MASK64
    words = []
    for _ in range(4):
        x, z = splitmix64(x)
        words.append(z)
    return np.array(words, dtype=np.uint64)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256:
    """Pure-Python xoshiro256**; ``state`` is the same uint64[4] the kernels use."""

    def __init__(self, seed: int = 0, state=None):
        if state is None:
            state = seed_state(seed)
        self.s = [int(w) for w in state]

    @property
    def state(self) -> np.ndarray:
        return np.array(self.s, dtype=np.uint64)

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.s = [s0, s1, s2, s3]
        return result

    def random(self) -> float:
        return (self.next_u64() >> 11) * _TWO_M53


class ScriptedRandom:
    """Replays a fixed list of uniforms; for forcing specific branches in tests."""

    def __init__(self, values):
        self.values = list(values)
        self.pos = 0

    def random(self) -> float:
        if self.pos >= len(self.values):
            raise IndexError("scripted randomness exhausted")
        u = self.values[self.pos]
        self.pos += 1
        return u
