"""Deterministic, splittable random streams.

All samplers in this package draw from splitmix64 sequences. A stream is
identified by a master seed plus a chain of integer keys (replicate index,
frog wake vertex, ...), so every frog's trajectory randomness is a pure
function of (seed, replicate, vertex) and never depends on scheduling order.
The numba kernels in :mod:`froglab.engine` and :mod:`froglab.walks` implement
bit-identical arithmetic; ``tests/test_rng.py`` pins the equivalence.
"""

from __future__ import annotations

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


def mix64(z: int) -> int:
    """Finalizer of splitmix64: a bijective scramble of a 64-bit word."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return (z ^ (z >> 31)) & MASK64


def derive_state(parent_state: int, key: int) -> int:
    """Fold an integer key into a stream state (stream splitting)."""
    return mix64((parent_state ^ mix64((key + GOLDEN) & MASK64)) & MASK64)


class Stream:
    """splitmix64 generator advancing by the golden-ratio increment.

    ``Stream.seeded(seed, k1, k2, ...)`` derives a child stream; children with
    distinct key chains are statistically independent.
    """

    __slots__ = ("state",)

    def __init__(self, state: int):
        self.state = state & MASK64

    @classmethod
    def seeded(cls, seed: int, *keys: int) -> "Stream":
        state = mix64(seed & MASK64)
        for key in keys:
            state = derive_state(state, key)
        return cls(state)

    def child(self, key: int) -> "Stream":
        return Stream(derive_state(self.state, key))

    def u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def unit(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.u64() >> 11) * _INV53

    def below(self, n: int) -> int:
        """Uniform integer in {0, ..., n-1}."""
        i = int(self.unit() * n)
        return n - 1 if i >= n else i
