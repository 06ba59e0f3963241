"""Deterministic xorshift64* stream used for reproducible random fields.

Update rule (64-bit unsigned arithmetic):

    x ^= x >> 12;  x ^= x << 25;  x ^= x >> 27;
    output = (x * 2685821657736338717) mod 2^64

Uniform doubles are output / 2^64.  The algorithm is pinned here (rather
than delegating to a library generator) so that any reimplementation can
reproduce the harness streams bit-for-bit.
"""

from __future__ import annotations

import numpy as np

__all__ = ["XorShift64Star"]

_MASK = (1 << 64) - 1
_MULT = 2685821657736338717


class XorShift64Star:
    def __init__(self, seed: int):
        self.state = (int(seed) & _MASK) or 0x9E3779B97F4A7C15

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & _MASK
        x ^= x >> 27
        self.state = x
        return (x * _MULT) & _MASK

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        return low + (high - low) * (self.next_u64() / 2.0**64)

    def array(self, shape, low: float = -1.0, high: float = 1.0) -> np.ndarray:
        n = int(np.prod(shape))
        vals = np.array([self.uniform(low, high) for _ in range(n)])
        return vals.reshape(shape)
