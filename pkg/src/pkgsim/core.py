"""Shared domain types and the load/imbalance metrics.

Load is counted in whole messages (unit cost per message). Imbalance at time t
is max worker load minus average worker load. The headline statistic for a run
is the time-average of the sampled imbalance divided by the stream length m
("fraction of average imbalance").
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

STRATEGIES = (
    "kg",
    "sg",
    "potc-static",
    "on-greedy",
    "off-greedy",
    "pkg-local",
    "pkg-global",
    "pkg-probe",
)

DISPATCH_MODES = ("rr", "kg", "shuffle")


@dataclass(frozen=True)
class Message:
    """One timestamped keyed unit of work.

    Timestamps are message indices: strictly increasing from 1, one message
    per unit of time. The value payload is opaque and unused by routing.
    """

    t: int
    key: int
    value: object = None


class KeyDistribution:
    """Explicit probability vector over a finite key universe.

    Probabilities are sorted non-increasing, so probs[0] is p1, the maximum
    key probability.
    """

    def __init__(self, probs: Sequence[float]):
        arr = np.asarray(probs, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("probability vector must be non-empty 1-D")
        if np.any(arr < 0):
            raise ValueError("probabilities must be non-negative")
        if abs(arr.sum() - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {arr.sum()!r}, not 1")
        if np.any(np.diff(arr) > 1e-15):
            raise ValueError("probabilities must be sorted non-increasing")
        self.probs = arr

    @property
    def K(self) -> int:
        return int(self.probs.size)

    @property
    def p1(self) -> float:
        return float(self.probs[0])

    def __len__(self) -> int:
        return self.K

    def __repr__(self) -> str:
        return f"KeyDistribution(K={self.K}, p1={self.p1:.4g})"


@dataclass
class SimConfig:
    """Parameters of one simulation run."""

    S: int = 1
    W: int = 1
    d: int = 2
    strategy: str = "pkg-local"
    seed: int = 0
    probe_period: Optional[int] = None  # in messages per source; None = never
    sample_interval: Optional[int] = None  # None = max(m // 1000, 1)
    dispatch: str = "rr"
    log_decisions: bool = False
    track_key_sets: bool = False
    random_ties: bool = False
    check_invariants: bool = False

    def __post_init__(self):
        if self.S < 1:
            raise ValueError("need at least one source (S >= 1)")
        if self.W < 1:
            raise ValueError("need at least one worker (W >= 1)")
        if not 1 <= self.d <= self.W:
            raise ValueError(f"number of choices d={self.d} must be in [1, W={self.W}]")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; known: {STRATEGIES}")
        if self.sample_interval is not None and self.sample_interval < 1:
            raise ValueError("sample_interval must be >= 1")
        if self.probe_period is not None and self.probe_period < 1:
            raise ValueError("probe_period must be >= 1")
        if self.dispatch not in DISPATCH_MODES:
            raise ValueError(f"unknown dispatch {self.dispatch!r}; known: {DISPATCH_MODES}")

    def to_dict(self) -> dict:
        return {
            "S": self.S,
            "W": self.W,
            "d": self.d,
            "strategy": self.strategy,
            "seed": self.seed,
            "probe_period": self.probe_period,
            "sample_interval": self.sample_interval,
            "dispatch": self.dispatch,
        }


def imbalance(loads) -> float:
    """Max load minus mean load; zero iff all workers carry the same load."""
    arr = np.asarray(loads, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("load vector must be non-empty")
    return float(arr.max() - arr.mean())


def fraction_avg_imbalance(imbalance_series: Sequence[tuple[int, float]], m: int) -> float:
    """Time-averaged sampled imbalance, normalized by the stream length."""
    if m <= 0:
        raise ValueError("total message count m must be positive")
    if len(imbalance_series) == 0:
        raise ValueError("imbalance series must be non-empty")
    mean_i = sum(v for _, v in imbalance_series) / len(imbalance_series)
    return mean_i / m
