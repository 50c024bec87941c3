"""Deterministic, counter-based random streams.

Every random draw in this package comes from a SplitMix64-style generator:
output ``i`` of a stream with seed ``s`` is ``mix64(s + (i+1) * GOLDEN)``
where ``mix64`` is the usual xorshift-multiply finalizer. Because draws are
addressed by counter instead of carried state, batches vectorize in numpy,
streams can be split by mixing an integer label into the seed, and the bit
patterns are identical on every platform (pure uint64 arithmetic).
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB
_LABEL_SALT = 0xD1B54A32D192ED03

_U53 = np.uint64(11)
_TWO_NEG53 = 2.0 ** -53


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a python int (mod 2^64)."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX_A) & _MASK
    z = ((z ^ (z >> 27)) * _MIX_B) & _MASK
    return z ^ (z >> 31)


def derive(seed: int, *labels: int) -> int:
    """Derive a child seed by folding integer labels into ``seed``.

    Used to split one user-facing seed into independent streams (sampling,
    initialization, subsampling, ...) without overlap.
    """
    s = seed & _MASK
    for lab in labels:
        s = mix64((s + GOLDEN) & _MASK) ^ mix64((lab & _MASK) ^ _LABEL_SALT)
    return s


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX_A)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX_B)
    return z ^ (z >> np.uint64(31))


class Stream:
    """Sequential view over a counter-based SplitMix64 stream.

    Draw order is part of the on-disk reproducibility contract: callers must
    consume draws in a fixed, documented order.
    """

    def __init__(self, seed: int):
        self.seed = seed & _MASK
        self._next = 0

    def raw(self, n: int) -> np.ndarray:
        """Next ``n`` raw uint64 words."""
        idx = np.arange(self._next + 1, self._next + n + 1, dtype=np.uint64)
        self._next += n
        return _mix64_array(np.uint64(self.seed) + idx * np.uint64(GOLDEN))

    def uniform(self, n: int) -> np.ndarray:
        """Uniform float64 in [0, 1), 53-bit resolution."""
        return (self.raw(n) >> _U53).astype(np.float64) * _TWO_NEG53

    def uniform_open(self, n: int) -> np.ndarray:
        """Uniform float64 in the open interval (0, 1); safe under log()."""
        return ((self.raw(n) >> _U53).astype(np.float64) + 0.5) * _TWO_NEG53

    def normal(self, n: int) -> np.ndarray:
        """Standard normals via Box-Muller: sqrt(-2 ln u1) * cos(2 pi u2).

        Consumes 2n counters (first n -> u1, next n -> u2).
        """
        u1 = self.uniform_open(n)
        u2 = self.uniform(n)
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * math.pi * u2)

    def integers(self, n: int, high: int) -> np.ndarray:
        """Uniform ints in [0, high) as int64 (floor of uniform * high)."""
        if high <= 0:
            raise ValueError("high must be positive")
        out = np.floor(self.uniform(n) * high).astype(np.int64)
        return np.minimum(out, high - 1)
