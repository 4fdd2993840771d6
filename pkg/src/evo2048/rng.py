"""SplitMix64 random streams.

SplitMix64 (Steele, Lea & Flood) is used everywhere randomness enters a run so
that game trajectories can be replayed bit-for-bit by any implementation that
follows the reference constants below.
"""
from __future__ import annotations

import random

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX_MUL_1 = 0xBF58476D1CE4E5B9
MIX_MUL_2 = 0x94D049BB133111EB
DOUBLE_UNIT = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    """SplitMix64 output finaliser."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX_MUL_1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_MUL_2) & MASK64
    return z ^ (z >> 31)


def derive_seed(*parts: int) -> int:
    """Fold integers into a single 64-bit seed.

    Order matters: ``derive_seed(run, gen, ind, game)`` gives every game of a
    run its own stream, independent of which worker plays it.
    """
    h = 0
    for p in parts:
        h = mix64((h + GOLDEN_GAMMA) ^ (p & MASK64))
    return h


class RandomStream(random.Random):
    """``random.Random`` driven by SplitMix64 instead of the Mersenne Twister.

    ``random()`` returns the top 53 bits of the next output scaled into
    [0, 1), so the same doubles can be produced in compiled code.
    """

    def __init__(self, seed: int = 0):
        self._state = 0
        super().__init__(seed)

    def seed(self, a=0, version=2):  # noqa: D102 - random.Random API
        self._state = int(a) & MASK64

    def getstate(self):
        return self._state

    def setstate(self, state):
        self._state = state

    def next_u64(self) -> int:
        self._state = (self._state + GOLDEN_GAMMA) & MASK64
        return mix64(self._state)

    def random(self) -> float:
        return (self.next_u64() >> 11) * DOUBLE_UNIT

    def getrandbits(self, k: int) -> int:
        if k < 0:
            raise ValueError("number of bits must be non-negative")
        out = 0
        filled = 0
        while filled < k:
            out = (out << 64) | self.next_u64()
            filled += 64
        return out >> (filled - k)
