"""Small deterministic random generator for reproducible audits.

Audit reports must be bit-for-bit reproducible across platforms, so instead
of relying on library generators whose streams may change between releases we
use SplitMix64, a tiny counter-based generator with a published reference
implementation.  Doubles are built from the top 53 bits, which is exactly the
usual uniform-in-[0,1) construction.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1


class DeterministicRng:
    """SplitMix64 stream producing uniform doubles in [0, 1)."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def choice_sign(self) -> float:
        return 1.0 if self.random() < 0.5 else -1.0
