"""Seeded random streams built on the PCG32 generator (XSH-RR 64/32).

The generator is the reference ``pcg32`` of O'Neill: a 64-bit linear
congruential state with multiplier ``6364136223846793005`` and an odd
increment ``(stream_id << 1) | 1``, seeded as in ``pcg32_srandom_r``.
Each step emits one 32-bit word via xorshift-high followed by a random
rotation.  Any language that implements these constants reproduces the
streams below bit for bit.

Derived quantities:

* Rademacher signs use the top bit of each word (1 -> +1, 0 -> -1).
* Uniform doubles in [0, 1) take 53 bits from two consecutive words
  (27 high bits of the first, 26 high bits of the second).
* Standard normals use the Box-Muller cosine branch on two doubles.
* Sub-streams for replicates and grid cells are obtained with
  :func:`substream`, which mixes labels into the stream id via SplitMix64.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MASK64 = (1 << 64) - 1
PCG_MULT = 6364136223846793005
_GOLDEN = 0x9E3779B97F4A7C15


@dataclass(frozen=True)
class RngSeed:
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= int(v) <= MASK64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v!r}")


def splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def substream(seed: RngSeed, *labels: int) -> RngSeed:
    """Child seed for a labelled sub-task, e.g. ``substream(s, cell, replicate)``."""
    sid = seed.stream_id
    for lab in labels:
        sid = splitmix64(sid ^ splitmix64(int(lab) & MASK64))
    return RngSeed(seed.seed, sid)


@lru_cache(maxsize=8)
def _jump_tables(count: int):
    # mult**k and sum_{i<k} mult**i (mod 2**64) for k = 0..count-1
    with np.errstate(over="ignore"):
        a = np.full(count, PCG_MULT, dtype=np.uint64)
        a[0] = 1
        powers = np.cumprod(a, dtype=np.uint64)
        sums = np.zeros(count, dtype=np.uint64)
        if count > 1:
            sums[1:] = np.cumsum(powers[:-1], dtype=np.uint64)
    return powers, sums


def _output(old: np.ndarray) -> np.ndarray:
    xorshifted = (((old >> np.uint64(18)) ^ old) >> np.uint64(27)).astype(np.uint32)
    rot = (old >> np.uint64(59)).astype(np.uint32)
    return (xorshifted >> rot) | (xorshifted << ((-rot.astype(np.int64)) & 31).astype(np.uint32))


class Pcg32:
    """PCG32 stream.  ``Pcg32(RngSeed(42, 54)).next_u32()`` gives ``0xa15c02b7``."""

    def __init__(self, seed: RngSeed | int, stream_id: int | None = None):
        if not isinstance(seed, RngSeed):
            seed = RngSeed(int(seed), 0 if stream_id is None else int(stream_id))
        self.inc = ((seed.stream_id << 1) | 1) & MASK64
        self.state = 0
        self._advance()
        self.state = (self.state + seed.seed) & MASK64
        self._advance()

    def _advance(self):
        self.state = (self.state * PCG_MULT + self.inc) & MASK64

    def next_u32(self) -> int:
        return int(self.words(1)[0])

    def words(self, count: int) -> np.ndarray:
        """Next ``count`` output words as a uint32 array."""
        if count <= 0:
            return np.zeros(0, dtype=np.uint32)
        powers, sums = _jump_tables(_bucket(count))
        powers, sums = powers[:count], sums[:count]
        with np.errstate(over="ignore"):
            states = powers * np.uint64(self.state) + sums * np.uint64(self.inc)
        out = _output(states)
        last = int(states[-1])
        self.state = (last * PCG_MULT + self.inc) & MASK64
        return out

    def signs(self, count: int) -> np.ndarray:
        w = self.words(count)
        return np.where(w >> np.uint32(31), 1, -1).astype(np.int8)

    def uniform(self, count: int) -> np.ndarray:
        w = self.words(2 * count).astype(np.uint64)
        hi = w[0::2] >> np.uint64(5)
        lo = w[1::2] >> np.uint64(6)
        return (hi * np.uint64(67108864) + lo).astype(np.float64) / 9007199254740992.0

    def normal(self, count: int) -> np.ndarray:
        u = self.uniform(2 * count)
        u1 = 1.0 - u[0::2]  # (0, 1]
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u[1::2])

    def below(self, bound: int) -> int:
        """Unbiased integer in [0, bound) (``pcg32_boundedrand_r``)."""
        if not 0 < bound <= 1 << 32:
            raise ValueError("bound must lie in (0, 2**32]")
        threshold = ((1 << 32) - bound) % bound
        while True:
            r = self.next_u32()
            if r >= threshold:
                return r % bound


def _bucket(count: int) -> int:
    # cache jump tables at power-of-two sizes
    size = 64
    while size < count:
        size *= 2
    return size


def as_seed(seed) -> RngSeed:
    if isinstance(seed, RngSeed):
        return seed
    if isinstance(seed, tuple):
        return RngSeed(*seed)
    return RngSeed(int(seed))
