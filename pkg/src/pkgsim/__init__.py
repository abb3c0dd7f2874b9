"""Stream-partitioning simulator: partial key grouping, baselines, and
empirical verification of the underlying balls-and-bins theory."""

from .core import (
    KeyDistribution,
    Message,
    SimConfig,
    STRATEGIES,
    fraction_avg_imbalance,
    imbalance,
)
from .hashing import HashFamily, derive_seed, mix64
from .simulator import SimResult, measure_disagreement, run, sweep
from .workloads import (
    Stream,
    WorkloadSpec,
    graph_edge_stream,
    lognormal_probs,
    sample_stream,
    trace_stream,
    uniform_probs,
    zipf_probs,
)

__all__ = [
    "KeyDistribution",
    "Message",
    "SimConfig",
    "STRATEGIES",
    "fraction_avg_imbalance",
    "imbalance",
    "HashFamily",
    "derive_seed",
    "mix64",
    "SimResult",
    "measure_disagreement",
    "run",
    "sweep",
    "Stream",
    "WorkloadSpec",
    "graph_edge_stream",
    "lognormal_probs",
    "sample_stream",
    "trace_stream",
    "uniform_probs",
    "zipf_probs",
]
