"""Key-stream generators and file ingestion.

Synthetic streams are i.i.d. draws from an explicit probability vector
(Zipf, log-normal weights, or uniform), sampled by exact inverse-CDF on the
cumulative array. File streams come either from key traces (one key token per
line, or `t,key` CSV) or from graph edge lists, where each edge becomes one
message: the source vertex decides which simulation source emits it and the
destination vertex is the routing key.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import KeyDistribution
from .hashing import derive_seed

KINDS = ("zipf", "lognormal", "uniform", "trace", "graph-edges")


@dataclass
class WorkloadSpec:
    kind: str = "zipf"
    K: int = 1000
    z: float = 1.0
    mu: float = 1.789
    sigma: float = 2.366
    m: int = 100_000
    path: Optional[str] = None
    seed: Optional[int] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown workload kind {self.kind!r}; known: {KINDS}")
        if self.kind in ("zipf", "lognormal", "uniform"):
            if self.K < 1:
                raise ValueError("key count K must be >= 1")
            if self.m < 1:
                raise ValueError("stream length m must be >= 1")
            if self.kind == "zipf" and self.z < 0:
                raise ValueError("Zipf exponent z must be >= 0")
            if self.kind == "lognormal" and self.sigma <= 0:
                raise ValueError("log-normal sigma must be > 0")
        else:
            if not self.path:
                raise ValueError(f"workload kind {self.kind!r} needs a file path")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class Stream:
    """A materialized message stream.

    keys[i] is the routing key of the message with timestamp i+1. For graph
    workloads, source_keys[i] carries the vertex id used to pick the emitting
    source; it is None otherwise.
    """

    keys: np.ndarray
    K: int
    source_keys: Optional[np.ndarray] = None
    dist: Optional[KeyDistribution] = None

    @property
    def m(self) -> int:
        return int(self.keys.size)

    def census(self) -> dict:
        """Full key-frequency census (offline knowledge for off-greedy)."""
        uniq, counts = np.unique(self.keys, return_counts=True)
        return dict(zip(uniq.tolist(), counts.tolist()))


def zipf_probs(K: int, z: float) -> KeyDistribution:
    """Zipf probabilities: p_r proportional to 1/r^z for rank r = 1..K."""
    if K < 1:
        raise ValueError("key count K must be >= 1")
    if z < 0:
        raise ValueError("Zipf exponent z must be >= 0")
    ranks = np.arange(1, K + 1, dtype=np.float64)
    weights = ranks ** (-z)
    return KeyDistribution(weights / weights.sum())


def uniform_probs(K: int) -> KeyDistribution:
    return KeyDistribution(np.full(K, 1.0 / K))


def lognormal_probs(K: int, mu: float, sigma: float, seed: int) -> KeyDistribution:
    """One log-normal weight per key, normalized and sorted non-increasing.

    The distribution parameters are the reproduction target, not the exact
    weights, which are a random draw per seed.
    """
    if K < 1:
        raise ValueError("key count K must be >= 1")
    if sigma <= 0:
        raise ValueError("log-normal sigma must be > 0")
    rng = np.random.default_rng(seed)
    weights = rng.lognormal(mean=mu, sigma=sigma, size=K)
    weights = np.sort(weights)[::-1]
    return KeyDistribution(weights / weights.sum())


def sample_stream(dist: KeyDistribution, m: int, seed: int) -> Stream:
    """m i.i.d. keys from `dist` via inverse-CDF on the cumulative array."""
    if m < 1:
        raise ValueError("stream length m must be >= 1")
    cum = np.cumsum(dist.probs)
    cum[-1] = 1.0  # guard the last bucket against round-off
    u = np.random.default_rng(seed).random(m)
    keys = np.searchsorted(cum, u, side="right").astype(np.int64)
    return Stream(keys=keys, K=dist.K, dist=dist)


def _decode_tokens(tokens: list) -> tuple[np.ndarray, int]:
    """Dictionary-encode tokens to dense ids in first-appearance order."""
    ids: dict = {}
    out = np.empty(len(tokens), dtype=np.int64)
    for i, tok in enumerate(tokens):
        idx = ids.get(tok)
        if idx is None:
            idx = len(ids)
            ids[tok] = idx
        out[i] = idx
    return out, len(ids)


def trace_stream(path: str) -> Stream:
    """Read a key trace: one key token per line, or `timestamp,key` CSV.

    The format is auto-detected from the first non-empty line. Keys are
    dictionary-encoded to dense integer ids in first-appearance order.
    """
    with open(path, "r", encoding="utf-8", newline=None) as fh:
        lines = fh.read().splitlines()
    tokens = []
    is_csv = None
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        if is_csv is None:
            is_csv = "," in line
        if is_csv:
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'timestamp,key', got {line!r}")
            tokens.append(parts[1].strip())
        else:
            if "," in line:
                raise ValueError(f"{path}:{lineno}: unexpected comma in plain key trace")
            tokens.append(line)
    keys, K = _decode_tokens(tokens)
    return Stream(keys=keys, K=K)


def graph_edge_stream(path: str) -> Stream:
    """Read a whitespace-separated `src dst` edge list ('#' comments skipped).

    Each edge yields one message: the source vertex id selects the emitting
    simulation source and the destination vertex id is the routing key.
    """
    srcs: list[int] = []
    dsts: list[int] = []
    with open(path, "r", encoding="utf-8", newline=None) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'src dst', got {line!r}")
            try:
                srcs.append(int(parts[0]))
                dsts.append(int(parts[1]))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-integer vertex id in {line!r}") from exc
    keys = np.asarray(dsts, dtype=np.int64)
    K = int(np.unique(keys).size) if keys.size else 0
    return Stream(keys=keys, K=K, source_keys=np.asarray(srcs, dtype=np.int64))


def make_distribution(spec: WorkloadSpec, seed: int) -> KeyDistribution:
    if spec.kind == "zipf":
        return zipf_probs(spec.K, spec.z)
    if spec.kind == "uniform":
        return uniform_probs(spec.K)
    if spec.kind == "lognormal":
        return lognormal_probs(spec.K, spec.mu, spec.sigma, seed)
    raise ValueError(f"workload kind {spec.kind!r} has no synthetic distribution")


def make_stream(spec: WorkloadSpec, default_seed: int = 0) -> Stream:
    """Materialize the stream described by `spec` (pure in (spec, seed))."""
    seed = spec.seed if spec.seed is not None else default_seed
    if spec.kind in ("zipf", "uniform", "lognormal"):
        # separate sub-seeds so the weight draw and the key sampler never
        # consume the same generator bit stream
        dist = make_distribution(spec, derive_seed(seed, 101))
        return sample_stream(dist, spec.m, derive_seed(seed, 202))
    if spec.kind == "trace":
        return trace_stream(spec.path)
    return graph_edge_stream(spec.path)
