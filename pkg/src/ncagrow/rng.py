"""Deterministic 64-bit generator (splitmix64) shared with the browser
viewer so that fire masks can be reproduced bit-for-bit on both sides.

The sequence is defined entirely by unsigned 64-bit arithmetic:

    state = (state + 0x9E3779B97F4A7C15) mod 2^64
    z = state
    z = ((z XOR (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
    z = ((z XOR (z >> 27)) * 0x94D049BB133111EB) mod 2^64
    output = z XOR (z >> 31)

and floats in [0, 1) are taken as (output >> 11) * 2**-53.  Fire masks fill
row-major, one draw per cell, mask = draw < fire_rate.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """Tiny counter-based generator; state is a single u64."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * MIX1) & MASK64
        z = ((z ^ (z >> 27)) * MIX2) & MASK64
        return z ^ (z >> 31)

    def next_float(self) -> float:
        return (self.next_u64() >> 11) * 2.0 ** -53


def fire_mask_from_seed(seed: int, height: int, width: int, fire_rate: float) -> np.ndarray:
    """Row-major (height, width) float32 0/1 mask, one draw per cell."""
    gen = SplitMix64(seed)
    out = np.empty(height * width, dtype=np.float32)
    for i in range(out.size):
        out[i] = 1.0 if gen.next_float() < fire_rate else 0.0
    return out.reshape(height, width)
