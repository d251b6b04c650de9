"""Portable, seedable random number generation.

Byte-identical output across platforms and Python versions is a hard
requirement for the generation pipeline, so we do not use `random.Random`
(whose int/choice helpers are not guaranteed stable) and instead ship a
small SplitMix64 generator.  SplitMix64 is a well-known 64-bit mixing
generator with good statistical quality for this kind of data shuffling.

Per-example seeds are derived with `derive_seed`, which hashes the run seed
together with stable identifiers (e.g. pair id and repeat index) through
blake2b.  Two runs with the same seed therefore produce the same stream for
every example independent of worker count or iteration order.
"""

from __future__ import annotations

import hashlib

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def derive_seed(*parts) -> int:
    """Hash arbitrary parts (run seed, ids, indices) into a 64-bit seed."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(str(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "big")


class Rng:
    """SplitMix64 generator with the few draw helpers the pipeline needs."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (2.0**-53)

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi], both ends inclusive, bias-free."""
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        n = hi - lo + 1
        # rejection sampling: accept draws below the largest multiple of n
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return lo + (u % n)

    def choice(self, seq):
        if not seq:
            raise ValueError("cannot choose from an empty sequence")
        return seq[self.randint(0, len(seq) - 1)]

    def sample(self, seq, k: int) -> list:
        """k distinct elements drawn without replacement (partial Fisher-Yates).

        Order of the returned elements is the draw order.  k must not exceed
        len(seq).
        """
        n = len(seq)
        if k > n:
            raise ValueError(f"sample size {k} exceeds population {n}")
        indices = list(range(n))
        for i in range(k):
            j = self.randint(i, n - 1)
            indices[i], indices[j] = indices[j], indices[i]
        return [seq[indices[i]] for i in range(k)]
