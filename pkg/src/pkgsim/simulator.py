"""Single-threaded simulation driver.

A run pushes one materialized stream through S sources and one routing
strategy, maintaining per-source partitioner state and the true global worker
loads, and sampling the imbalance every `sample_interval` messages (the final
time is always sampled exactly). Runs are strictly sequential so that the
global-oracle strategies see loads updated after every message, and all
routing state is integer-only, which makes runs bitwise reproducible across
platforms for a fixed seed.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .core import SimConfig, fraction_avg_imbalance, imbalance
from .hashing import HashFamily, derive_seed
from .partitioners import (
    KeyGrouping,
    OnGreedy,
    Partitioner,
    PkgGlobal,
    PkgLocal,
    PotcStatic,
    ShuffleGrouping,
    StaticTable,
    off_greedy_assign,
)
from .workloads import Stream, WorkloadSpec, make_stream

# dense key universes up to this size get a precomputed per-key choice table
_CHOICE_CACHE_LIMIT = 4_000_000


class ConfigError(ValueError):
    """Invalid or inconsistent simulation configuration."""


@dataclass
class SimResult:
    final_loads: list
    imbalance_series: list
    fraction_avg_imbalance: float
    final_imbalance: float
    m: int
    config: dict
    workload: dict
    seed: int
    wall_time: float
    per_key_worker_sets: Optional[dict] = None
    max_key_worker_set: Optional[int] = None
    decisions: Optional[list] = None
    local_estimates: Optional[list] = None  # per-source estimate vectors at t=m

    def summary(self) -> dict:
        return {
            "config": self.config,
            "workload": self.workload,
            "seed": self.seed,
            "m": self.m,
            "final_loads": self.final_loads,
            "final_imbalance": self.final_imbalance,
            "fraction_avg_imbalance": self.fraction_avg_imbalance,
            "max_key_worker_set": self.max_key_worker_set,
            "wall_time": self.wall_time,
        }


def _build_family(config: SimConfig) -> HashFamily:
    d = config.d
    if config.strategy == "potc-static":
        d = max(d, 2)
    return HashFamily(d, config.W, derive_seed(config.seed, 7))


def _build_partitioners(config: SimConfig, family: HashFamily, loads: list,
                        stream: Stream, choice_cache, h1_cache) -> list[Partitioner]:
    S, W = config.S, config.W
    strategy = config.strategy
    rng = random.Random(derive_seed(config.seed, 9)) if config.random_ties else None
    if strategy == "kg":
        return [KeyGrouping(family, h1_cache) for _ in range(S)]
    if strategy == "sg":
        return [ShuffleGrouping(W) for _ in range(S)]
    if strategy == "potc-static":
        table: dict = {}
        return [PotcStatic(family, table, loads, rng) for _ in range(S)]
    if strategy == "on-greedy":
        table = {}
        return [OnGreedy(W, table, loads, rng) for _ in range(S)]
    if strategy == "off-greedy":
        census = stream.census()
        if not census:
            raise ConfigError("off-greedy needs a non-empty key-frequency census")
        table = off_greedy_assign(census, W)
        return [StaticTable(table) for _ in range(S)]
    if strategy in ("pkg-local", "pkg-probe"):
        if strategy == "pkg-probe" and config.probe_period is None:
            raise ConfigError("pkg-probe requires probe_period")
        return [PkgLocal(family, W, choice_cache, rng) for _ in range(S)]
    if strategy == "pkg-global":
        return [PkgGlobal(family, W, loads, choice_cache, rng) for _ in range(S)]
    raise ConfigError(f"unknown strategy {strategy!r}")


def _source_schedule(config: SimConfig, stream: Stream) -> list:
    """Per-message source index. Graph workloads hash the source vertex id."""
    m = stream.m
    if stream.source_keys is not None or config.dispatch == "kg":
        if stream.source_keys is None:
            raise ConfigError("dispatch 'kg' needs a stream with source keys")
        src_family = HashFamily(1, config.S, derive_seed(config.seed, 8))
        return src_family.eval_many(0, stream.source_keys).tolist()
    if config.dispatch == "shuffle":
        rng = np.random.default_rng(derive_seed(config.seed, 10))
        return rng.integers(0, config.S, size=m).tolist()
    return [t % config.S for t in range(m)]


def run(config: SimConfig, workload: Union[WorkloadSpec, Stream]) -> SimResult:
    """Simulate one full stream under one strategy."""
    if isinstance(workload, WorkloadSpec):
        stream = make_stream(workload, default_seed=derive_seed(config.seed, 11))
        workload_echo = workload.to_dict()
    else:
        stream = workload
        workload_echo = {"kind": "stream", "K": stream.K, "m": stream.m}
    family = _build_family(config)
    return _run_stream(config, stream, family, workload_echo)


def _run_stream(config: SimConfig, stream: Stream, family: HashFamily,
                workload_echo: dict) -> SimResult:
    t0 = time.perf_counter()
    m = stream.m
    if m == 0:
        raise ConfigError("cannot simulate an empty stream")
    W, S = config.W, config.S
    keys = stream.keys
    max_key = int(keys.max())
    choice_cache = h1_cache = None
    if max_key < _CHOICE_CACHE_LIMIT:
        choice_cache = family.choice_table(max_key + 1)
        h1_cache = family.eval_many(0, np.arange(max_key + 1, dtype=np.uint64)).tolist()

    loads = [0] * W
    parts = _build_partitioners(config, family, loads, stream, choice_cache, h1_cache)
    sources = _source_schedule(config, stream)
    key_list = keys.tolist()

    interval = config.sample_interval or max(m // 1000, 1)
    probe_period = config.probe_period
    local_strategy = config.strategy in ("pkg-local", "pkg-probe")
    do_probe = probe_period is not None and local_strategy
    src_counts = [0] * S

    series: list[tuple[int, float]] = []
    decisions = [] if config.log_decisions else None
    key_sets: Optional[dict] = {} if config.track_key_sets else None
    check = config.check_invariants

    for idx in range(m):
        key = key_list[idx]
        j = sources[idx]
        part = parts[j]
        w = part.route(key)
        loads[w] += 1
        if do_probe:
            src_counts[j] += 1
            if src_counts[j] % probe_period == 0:
                part.probe_sync(loads)
        if decisions is not None:
            decisions.append((idx + 1, key, w))
        if key_sets is not None:
            s = key_sets.get(key)
            if s is None:
                key_sets[key] = {w}
            else:
                s.add(w)
        t = idx + 1
        if t % interval == 0 or t == m:
            cur = imbalance(loads)
            series.append((t, cur))
            if check:
                _check_sample(config, t, loads, cur, parts, local_strategy,
                              probing=do_probe)

    frac = fraction_avg_imbalance(series, m)
    result = SimResult(
        final_loads=list(loads),
        imbalance_series=series,
        fraction_avg_imbalance=frac,
        final_imbalance=series[-1][1],
        m=m,
        config=config.to_dict(),
        workload=workload_echo,
        seed=config.seed,
        wall_time=time.perf_counter() - t0,
        per_key_worker_sets=key_sets,
        max_key_worker_set=(max(len(s) for s in key_sets.values()) if key_sets else None),
        decisions=decisions,
        local_estimates=[list(p.estimate) for p in parts] if local_strategy else None,
    )
    return result


def _check_sample(config: SimConfig, t: int, loads: list, cur: float,
                  parts: list, local_strategy: bool, probing: bool) -> None:
    total = sum(loads)
    if total != t:
        raise AssertionError(f"conservation violated at t={t}: sum(loads)={total}")
    bound = t * (1 - 1 / config.W)
    if not (-1e-9 <= cur <= bound + 1e-9):
        raise AssertionError(f"imbalance {cur} outside [0, {bound}] at t={t}")
    if local_strategy and not probing:
        # sum of per-source local estimates must equal the true global loads
        for i in range(config.W):
            est_sum = sum(p.estimate[i] for p in parts)
            if est_sum != loads[i]:
                raise AssertionError(
                    f"local-estimate consistency violated at t={t}, worker {i}: "
                    f"{est_sum} != {loads[i]}")
        local_imb_sum = sum(imbalance(p.estimate) for p in parts)
        if cur > local_imb_sum + 1e-9:
            raise AssertionError(
                f"I(t)={cur} exceeds sum of local imbalances {local_imb_sum} at t={t}")


def replay_decisions(decisions: list, W: int) -> list:
    """Recompute final worker loads from a decision log."""
    loads = [0] * W
    for _, _, w in decisions:
        loads[w] += 1
    return loads


def sweep(jobs: list) -> list[dict]:
    """Run a list of (config, workload) pairs; one summary row each.

    Failed runs produce a row with an `error` column instead of aborting
    the whole sweep.
    """
    rows = []
    for config, workload in jobs:
        row = {}
        if isinstance(workload, WorkloadSpec):
            row.update(workload.to_dict())
            row["workload_seed"] = row.pop("seed", None)
        row.update(config.to_dict())
        try:
            res = run(config, workload)
            row["fraction_avg_imbalance"] = res.fraction_avg_imbalance
            row["final_imbalance"] = res.final_imbalance
            row["m"] = res.m
            row["error"] = ""
        except Exception as exc:  # keep the sweep alive, record the failure
            row["fraction_avg_imbalance"] = float("nan")
            row["final_imbalance"] = float("nan")
            row["error"] = str(exc)
        rows.append(row)
    return rows


def aggregate_rows(rows: list[dict], group_keys: list[str],
                   value_key: str = "fraction_avg_imbalance") -> list[dict]:
    """Collapse seeds: median/min/max of `value_key` per group."""
    groups: dict = {}
    for row in rows:
        if row.get("error"):
            continue
        gk = tuple(row.get(k) for k in group_keys)
        groups.setdefault(gk, []).append(float(row[value_key]))
    out = []
    for gk, vals in groups.items():
        rec = dict(zip(group_keys, gk))
        rec[f"{value_key}_median"] = float(np.median(vals))
        rec[f"{value_key}_min"] = float(min(vals))
        rec[f"{value_key}_max"] = float(max(vals))
        rec["trials"] = len(vals)
        out.append(rec)
    return out


def measure_disagreement(config: SimConfig, workload: Union[WorkloadSpec, Stream],
                         eps: float = 1e-12) -> dict:
    """Route one stream with pkg-local and pkg-global and compare decisions.

    Both variants share the same hash family and the same stream, so any
    difference in destinations comes purely from local vs oracle load views.
    """
    if isinstance(workload, WorkloadSpec):
        stream = make_stream(workload, default_seed=derive_seed(config.seed, 11))
        workload_echo = workload.to_dict()
    else:
        stream = workload
        workload_echo = {"kind": "stream", "K": stream.K, "m": stream.m}
    family = _build_family(config)

    results = {}
    for strategy in ("pkg-local", "pkg-global"):
        cfg = SimConfig(**{**config.to_dict(),
                           "strategy": strategy,
                           "probe_period": None},
                        log_decisions=True)
        results[strategy] = _run_stream(cfg, stream, family, workload_echo)
    local, glob = results["pkg-local"], results["pkg-global"]
    differing = sum(1 for a, b in zip(local.decisions, glob.decisions) if a[2] != b[2])
    return {
        "percent_disagree": 100.0 * differing / stream.m,
        "balance_ratio": local.fraction_avg_imbalance / max(glob.fraction_avg_imbalance, eps),
        "fraction_avg_imbalance_local": local.fraction_avg_imbalance,
        "fraction_avg_imbalance_global": glob.fraction_avg_imbalance,
        "m": stream.m,
    }
