"""Seedable family of d independent uniform hash functions key -> [0, n).

All sources in a simulation share one family instance, so routing decisions
are reproducible across processes given the same master seed. Seeds for the
individual functions are derived from the master seed alone (not from d), so
a d=2 family and a d=4 family built from the same master seed agree on their
first two functions. This makes d-sweeps comparable.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(x: int) -> int:
    """SplitMix64 finalizer: 64-bit avalanche mix."""
    x &= _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


def _mix64_np(x: np.ndarray) -> np.ndarray:
    # numpy uint64 arithmetic wraps mod 2^64, matching mix64 exactly
    x = x.astype(np.uint64, copy=True)
    x ^= x >> np.uint64(30)
    x *= np.uint64(0xBF58476D1CE4E5B9)
    x ^= x >> np.uint64(27)
    x *= np.uint64(0x94D049BB133111EB)
    x ^= x >> np.uint64(31)
    return x


class HashFamily:
    """d independent seeded hash functions from integer keys to [0, n)."""

    def __init__(self, d: int, n: int, master_seed: int):
        if d < 1:
            raise ValueError("need at least one hash function (d >= 1)")
        if n < 1:
            raise ValueError("codomain must be non-empty (n >= 1)")
        self.d = d
        self.n = n
        self.master_seed = master_seed & _MASK64
        self.seeds = [mix64(self.master_seed + _GOLDEN * (i + 1)) for i in range(d)]

    def eval(self, i: int, key: int) -> int:
        """Worker index for `key` under function `i`. Pure and deterministic."""
        if not 0 <= i < self.d:
            raise ValueError(f"function index {i} out of range for d={self.d}")
        return mix64(self.seeds[i] ^ mix64(key)) % self.n

    def eval_many(self, i: int, keys: np.ndarray) -> np.ndarray:
        """Vectorized eval over an array of keys; identical values to eval()."""
        if not 0 <= i < self.d:
            raise ValueError(f"function index {i} out of range for d={self.d}")
        mixed = _mix64_np(np.asarray(keys, dtype=np.uint64))
        mixed ^= np.uint64(self.seeds[i])
        return (_mix64_np(mixed) % np.uint64(self.n)).astype(np.int64)

    def choices(self, key: int) -> tuple[int, ...]:
        """All d worker choices for one key (duplicates kept)."""
        return tuple(self.eval(i, key) for i in range(self.d))

    def choice_table(self, num_keys: int) -> list[tuple[int, ...]]:
        """Precomputed choice tuples for the dense key universe [0, num_keys).

        Each tuple is sorted ascending, so scanning it with a strict '<'
        comparison implements lowest-worker-index tie-breaking for free.
        """
        keys = np.arange(num_keys, dtype=np.uint64)
        cols = [self.eval_many(i, keys) for i in range(self.d)]
        stacked = np.sort(np.stack(cols, axis=1), axis=1)
        return [tuple(row) for row in stacked.tolist()]


def derive_seed(master_seed: int, label: int) -> int:
    """Independent 64-bit sub-seed for component `label` of a run."""
    return mix64((master_seed & _MASK64) ^ mix64(label + 1))
