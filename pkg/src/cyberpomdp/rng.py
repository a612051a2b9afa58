"""Counter-based SplitMix64 streams.

The n-th draw (cursor n, starting at 0) of a stream with seed ``s`` is the
SplitMix64 finalizer applied to ``s + (n + 1) * 0x9E3779B97F4A7C15``, which is
exactly the n-th output of the reference SplitMix64 generator seeded with
``s``. Draws therefore depend only on ``(seed, cursor)`` and replay
bit-identically in any language with 64-bit wrapping arithmetic.
"""

from __future__ import annotations

import math

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_CHILD_TAG = 0xD1B54A32D192ED03
_TO_UNIT = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    """SplitMix64 output finalizer."""
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class RandomStream:
    """Explicit random stream; every stochastic call in the package takes one."""

    __slots__ = ("seed", "cursor")

    def __init__(self, seed: int, cursor: int = 0):
        if not 0 <= seed <= MASK64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        if cursor < 0:
            raise ValueError("cursor must be non-negative")
        self.seed = seed
        self.cursor = cursor

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed:#018x}, cursor={self.cursor})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RandomStream):
            return NotImplemented
        return self.seed == other.seed and self.cursor == other.cursor

    def __hash__(self) -> int:
        return hash((self.seed, self.cursor))

    def copy(self) -> RandomStream:
        return RandomStream(self.seed, self.cursor)

    def next_u64(self) -> int:
        self.cursor += 1
        return mix64((self.seed + self.cursor * GOLDEN_GAMMA) & MASK64)

    def next_unit(self) -> float:
        """Uniform double in [0, 1) built from the top 53 bits."""
        self.cursor += 1
        return (mix64((self.seed + self.cursor * GOLDEN_GAMMA) & MASK64) >> 11) * _TO_UNIT

    def next_below(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection (no modulo bias)."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def next_geometric(self, p: float) -> float:
        """Number of trials up to and including the first success (support 1, 2, ...).

        Returns ``math.inf`` when ``p`` is 0.
        """
        if p >= 1.0:
            self.cursor += 1
            return 1
        if p <= 0.0:
            self.cursor += 1
            return math.inf
        u = 1.0 - self.next_unit()  # (0, 1]
        return 1 + int(math.floor(math.log(u) / math.log1p(-p)))

    def child(self, index: int) -> RandomStream:
        """Independent sub-stream; depends on (seed, index) only, not on the cursor."""
        base = mix64(self.seed ^ _CHILD_TAG)
        return RandomStream(mix64((base + (index + 1) * GOLDEN_GAMMA) & MASK64))

    def children(self, count: int):
        """``child(0) .. child(count - 1)`` without recomputing the shared base."""
        base = mix64(self.seed ^ _CHILD_TAG)
        for index in range(count):
            yield RandomStream(mix64((base + (index + 1) * GOLDEN_GAMMA) & MASK64))


def derive_seed(master: int, index: int) -> int:
    return RandomStream(master).child(index).seed
