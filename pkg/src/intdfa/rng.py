"""SplitMix64 pseudo-random generator.

SplitMix64 is counter based: the k-th output is ``mix(seed + k * GAMMA)``, so
blocks of draws can be produced with vectorised uint64 arithmetic and still
match the scalar reference bit for bit on every platform.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15


def splitmix64_scalar(state: int) -> tuple[int, int]:
    """Reference scalar step. Returns ``(new_state, output)``."""
    state = (state + GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def derive_seed(seed: int, stream: int) -> int:
    """Seed for sub-stream ``stream`` of a run seeded with ``seed``.

    Hashing keeps the derived stream from being a shifted copy of the parent.
    """
    return splitmix64_scalar((int(seed) ^ (int(stream) * GAMMA)) & MASK64)[1]


class Rng:
    """Deterministic 64-bit generator with unbiased bounded draws."""

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & MASK64
        self.counter = 0

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, counter={self.counter})"

    def raw(self, n: int) -> np.ndarray:
        """Next ``n`` raw 64-bit outputs as a uint64 array."""
        k = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        z = np.uint64(self.seed) + k * np.uint64(GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))

    def next_u64(self) -> int:
        return int(self.raw(1)[0])

    def integers(self, lo: int, hi: int, size: int) -> np.ndarray:
        """``size`` draws uniform on the inclusive range [lo, hi].

        Raw outputs at or above the largest multiple of the range width are
        rejected, so there is no modulo bias. Accepted values are consumed in
        stream order, which keeps the result identical to a one-at-a-time loop.
        """
        if lo > hi:
            raise ValueError(f"invalid range [{lo}, {hi}]")
        width = hi - lo + 1
        if width > 1 << 63:
            raise ValueError("range wider than 2**63 is not supported")
        limit = ((1 << 64) // width) * width
        out = np.empty(size, dtype=np.int64)
        filled = 0
        while filled < size:
            need = size - filled
            draws = self.raw(need)
            if limit < 1 << 64:
                accepted = draws[draws < np.uint64(limit)]
            else:
                accepted = draws
            vals = (accepted % np.uint64(width)).astype(np.int64) + lo
            out[filled:filled + len(vals)] = vals
            filled += len(vals)
        return out

    def below(self, n: int) -> int:
        """One draw uniform on [0, n)."""
        return int(self.integers(0, n - 1, 1)[0])
