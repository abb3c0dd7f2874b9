"""Routing strategies: one `route(key) -> worker` call per message.

Every partitioner instance belongs to a single source and only mutates its own
state. Strategies that need a view of true worker loads (potc-static,
on-greedy, pkg-global) receive a reference to the simulator's global load
list; they read it but never write it. Static strategies share one routing
table across all sources of a run, since they model coordinated techniques.

Ties at equal load are broken by the lowest worker index, which keeps runs
byte-for-byte reproducible. Random tie-breaking is available behind
`random_ties` but off by default.
"""

from __future__ import annotations

import random
from typing import Optional, Sequence

from .hashing import HashFamily


def _argmin_choice(choices, loads, rng: Optional[random.Random]) -> int:
    """Least-loaded worker among `choices`; `choices` is sorted ascending, so
    keeping the first strict minimum picks the lowest worker index on ties."""
    if rng is None:
        best_w = choices[0]
        best_l = loads[best_w]
        for w in choices[1:]:
            l = loads[w]
            if l < best_l:
                best_l = l
                best_w = w
        return best_w
    best = [choices[0]]
    best_l = loads[choices[0]]
    for w in choices[1:]:
        l = loads[w]
        if l < best_l:
            best_l = l
            best = [w]
        elif l == best_l and w != best[-1]:
            best.append(w)
    return best[0] if len(best) == 1 else rng.choice(best)


class Partitioner:
    """Base interface: route one message's key to a worker in [0, W)."""

    def route(self, key: int) -> int:
        raise NotImplementedError

    def probe_sync(self, global_loads: Sequence[int]) -> None:
        """Overwrite local estimates with true loads. No-op unless PKG-local."""


class KeyGrouping(Partitioner):
    """Single-choice hashing: worker = h1(key). Stateless."""

    def __init__(self, family: HashFamily, h1_cache: Optional[list] = None):
        self.family = family
        self._cache = h1_cache  # plain h1 values, not the sorted choice tuples

    def route(self, key: int) -> int:
        if self._cache is not None:
            return self._cache[key]
        return self.family.eval(0, key)


class ShuffleGrouping(Partitioner):
    """Round-robin over workers using a private per-source counter."""

    def __init__(self, W: int):
        self.W = W
        self._counter = 0

    def route(self, key: int) -> int:
        w = self._counter % self.W
        self._counter += 1
        return w


class PotcStatic(Partitioner):
    """Power of two choices without key splitting.

    First occurrence of a key picks the least loaded of its two hash choices
    and pins the key there for the rest of the run. The table and load view
    are global (shared by all sources), modeling a coordinated system.
    """

    def __init__(self, family: HashFamily, table: dict, loads_view: Sequence[int],
                 rng: Optional[random.Random] = None):
        if family.d < 2:
            raise ValueError("potc-static needs a family with d >= 2")
        self.family = family
        self.table = table
        self.loads = loads_view
        self.rng = rng

    def route(self, key: int) -> int:
        w = self.table.get(key)
        if w is None:
            a, b = self.family.eval(0, key), self.family.eval(1, key)
            pair = (a, b) if a <= b else (b, a)
            w = _argmin_choice(pair, self.loads, self.rng)
            self.table[key] = w
        return w


class OnGreedy(Partitioner):
    """Online greedy: a new key is pinned to the globally least loaded worker."""

    def __init__(self, W: int, table: dict, loads_view: Sequence[int],
                 rng: Optional[random.Random] = None):
        self.all_workers = tuple(range(W))
        self.table = table
        self.loads = loads_view
        self.rng = rng

    def route(self, key: int) -> int:
        w = self.table.get(key)
        if w is None:
            w = _argmin_choice(self.all_workers, self.loads, self.rng)
            self.table[key] = w
        return w


class StaticTable(Partitioner):
    """Routes by a fixed precomputed key -> worker table (off-greedy)."""

    def __init__(self, table: dict):
        self.table = table

    def route(self, key: int) -> int:
        return self.table[key]


def off_greedy_assign(freqs: dict, W: int) -> dict:
    """Offline greedy assignment from a full key-frequency census.

    Keys are processed in non-increasing frequency order (frequency ties by
    ascending key id) and each goes to the bin with the least cumulative
    assigned frequency. Guarantees max bin weight <= mean weight + max key
    frequency.
    """
    table: dict = {}
    bin_weight = [0] * W
    for key, count in sorted(freqs.items(), key=lambda kv: (-kv[1], kv[0])):
        w = min(range(W), key=lambda i: bin_weight[i])
        bin_weight[w] += count
        table[key] = w
    return table


class PkgLocal(Partitioner):
    """Greedy-d with key splitting and per-source local load estimation.

    Routes to the least loaded of the key's d hash choices according to this
    source's own estimate vector, then increments that entry. No routing table
    is kept: the choice is re-made for every message.
    """

    def __init__(self, family: HashFamily, W: int,
                 choice_cache: Optional[list] = None,
                 rng: Optional[random.Random] = None):
        self.family = family
        self.W = W
        self.estimate = [0] * W
        self._cache = choice_cache
        self.rng = rng

    def _choices(self, key: int):
        if self._cache is not None:
            return self._cache[key]
        return tuple(sorted(self.family.choices(key)))

    def route(self, key: int) -> int:
        w = _argmin_choice(self._choices(key), self.estimate, self.rng)
        self.estimate[w] += 1
        return w

    def probe_sync(self, global_loads: Sequence[int]) -> None:
        self.estimate = list(global_loads)


class PkgGlobal(Partitioner):
    """Greedy-d with key splitting against the true global loads (oracle)."""

    def __init__(self, family: HashFamily, W: int, loads_view: Sequence[int],
                 choice_cache: Optional[list] = None,
                 rng: Optional[random.Random] = None):
        self.family = family
        self.W = W
        self.loads = loads_view
        self._cache = choice_cache
        self.rng = rng

    def _choices(self, key: int):
        if self._cache is not None:
            return self._cache[key]
        return tuple(sorted(self.family.choices(key)))

    def route(self, key: int) -> int:
        return _argmin_choice(self._choices(key), self.loads, self.rng)


def probe_sync(estimate: Sequence[int], global_loads: Sequence[int]) -> list:
    """Return a fresh local estimate equal to the true global loads."""
    return list(global_loads)
