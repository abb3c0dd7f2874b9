"""Empirical verification of the load-balance theory behind greedy-d routing.

The central object is the weighted measure of a bin subset B:
mu_r(B) = total probability of keys whose first r hash choices all land in B.
Monte Carlo over freshly drawn hash families checks the expectation
E[mu_1(B)] = |B|/n and its tail, the subset-ratio bound
mu_d(B) <= |B|/n for all |B| <= n/5 (equivalently, vertex expansion of the
key-bin bipartite graph), and the imbalance scaling I(m) = O(m/n) for d >= 2
versus an extra ln n / ln ln n factor for d = 1.

Asymptotic "with high probability" claims are gated with loose desk-scale
constants; the checks verify direction and order of growth, not sharp
constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .core import KeyDistribution, SimConfig
from .hashing import HashFamily, derive_seed
from .simulator import run as sim_run
from .workloads import sample_stream, uniform_probs

EXHAUSTIVE_N_CAP = 22


@dataclass
class MeasureReport:
    check: str
    n: int
    d: int
    K: int
    p1: float
    trials: int
    passed: bool
    empirical_mean: Optional[float] = None
    theoretical_mean: Optional[float] = None
    std_err: Optional[float] = None
    max_subset_ratio: Optional[float] = None
    violation_rate: Optional[float] = None
    tail_exceedance: Optional[float] = None
    tail_bound: Optional[float] = None
    tail_skipped: bool = False
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k != "details" and v is not None}
        out.update(self.details)
        return out


def mu_r(B: Sequence[int], dist: KeyDistribution, family: HashFamily, r: int) -> float:
    """Total probability of keys whose first r hash choices all lie in B."""
    bins = set(int(b) for b in B)
    if not bins:
        raise ValueError("bin subset B must be non-empty")
    if not 1 <= r <= family.d:
        raise ValueError(f"r={r} out of range for family with d={family.d}")
    if any(b < 0 or b >= family.n for b in bins):
        raise ValueError("B contains bin indices outside [0, n)")
    member = np.zeros(family.n, dtype=bool)
    member[list(bins)] = True
    keys = np.arange(dist.K, dtype=np.uint64)
    inside = np.ones(dist.K, dtype=bool)
    for i in range(r):
        inside &= member[family.eval_many(i, keys)]
    return float(dist.probs[inside].sum())


def verify_mu1(n: int, B_size: int, dist: KeyDistribution, trials: int,
               lam: float = math.e, master_seed: int = 0) -> MeasureReport:
    """Monte Carlo check of E[mu_1(B)] = |B|/n and its exceedance tail.

    The tail gate Pr[mu_1(B) >= (|B|/n) e*lam] <= (1/lam^lam)^|B| holds under
    p1 <= 1/n; the empirical frequency is allowed a 2x slack since the bound
    is not tight. When p1 > 1/n the tail check is skipped and only the
    expectation is verified.
    """
    if trials < 100:
        raise ValueError("need at least 100 trials for a meaningful estimate")
    if not 1 <= B_size <= n:
        raise ValueError("B_size must be in [1, n]")
    B = list(range(B_size))
    keys = np.arange(dist.K, dtype=np.uint64)
    member = np.zeros(n, dtype=bool)
    member[B] = True
    vals = np.empty(trials)
    for t in range(trials):
        fam = HashFamily(1, n, derive_seed(master_seed, t))
        vals[t] = dist.probs[member[fam.eval_many(0, keys)]].sum()
    expected = B_size / n
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(trials))
    mean_ok = abs(mean - expected) <= max(3 * se, 1e-12)

    tail_skipped = dist.p1 > 1.0 / n + 1e-12
    threshold = expected * math.e * lam
    exceed = float((vals >= threshold - 1e-12).mean())
    bound = lam ** (-lam * B_size)
    tail_ok = tail_skipped or exceed <= 2 * bound + 1e-12
    return MeasureReport(
        check="mu1", n=n, d=1, K=dist.K, p1=dist.p1, trials=trials,
        passed=mean_ok and tail_ok,
        empirical_mean=mean, theoretical_mean=expected, std_err=se,
        tail_exceedance=exceed, tail_bound=bound, tail_skipped=tail_skipped,
        details={"B_size": B_size, "lambda": lam, "mean_ok": mean_ok,
                 "tail_ok": tail_ok},
    )


def _subset_masks(n: int, max_size: int, mode: str, subsets_per_size: int,
                  rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Bitmasks of bin subsets with 1 <= |B| <= max_size, plus their sizes."""
    masks, sizes = [], []
    for k in range(1, max_size + 1):
        if mode == "exhaustive":
            for combo in combinations(range(n), k):
                masks.append(sum(1 << b for b in combo))
                sizes.append(k)
        else:
            for _ in range(subsets_per_size):
                combo = rng.choice(n, size=k, replace=False)
                masks.append(int(sum(1 << int(b) for b in combo)))
                sizes.append(k)
    return np.asarray(masks, dtype=np.uint64), np.asarray(sizes, dtype=np.float64)


def _key_choice_masks(family: HashFamily, K: int) -> np.ndarray:
    keys = np.arange(K, dtype=np.uint64)
    mask = np.zeros(K, dtype=np.uint64)
    for i in range(family.d):
        mask |= np.uint64(1) << family.eval_many(i, keys).astype(np.uint64)
    return mask


def verify_mu_d_subsets(n: int, dist: KeyDistribution, d: int, trials: int,
                        mode: str = "exhaustive", subsets_per_size: int = 200,
                        master_seed: int = 0) -> MeasureReport:
    """Check E[mu_d(B)] = (|B|/n)^d and the subset-ratio bound.

    Per trial, a fresh hash family is drawn and the max of
    mu_d(B) / (|B|/n) over all subsets with |B| <= n/5 is computed
    (exhaustively for n <= 22, by random subsets otherwise). A trial
    violates when the max ratio exceeds 1.
    """
    if mode not in ("exhaustive", "sampled"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "exhaustive" and n > EXHAUSTIVE_N_CAP:
        raise ValueError(
            f"exhaustive subset enumeration capped at n={EXHAUSTIVE_N_CAP}; "
            "use mode='sampled' for larger n")
    if n > 64:
        raise ValueError("bitmask subset representation requires n <= 64")
    max_size = n // 5
    rng = np.random.default_rng(derive_seed(master_seed, 1_000_003))
    masks, sizes = _subset_masks(n, max_size, mode, subsets_per_size, rng)

    ref_size = max(max_size, 1)
    ref_mask = np.uint64((1 << ref_size) - 1)
    ref_vals = np.empty(trials)
    violations = 0
    max_ratio_seen = 0.0
    for t in range(trials):
        fam = HashFamily(d, n, derive_seed(master_seed, t))
        keymask = _key_choice_masks(fam, dist.K)
        ref_vals[t] = dist.probs[(keymask & ~ref_mask) == 0].sum()
        if masks.size:
            contain = (keymask[None, :] & ~masks[:, None]) == 0
            mu_vals = contain.astype(np.float64) @ dist.probs
            ratios = mu_vals / (sizes / n)
            trial_max = float(ratios.max())
            max_ratio_seen = max(max_ratio_seen, trial_max)
            if trial_max > 1.0 + 1e-12:
                violations += 1
    expected_ref = (ref_size / n) ** d
    mean_ref = float(ref_vals.mean())
    se_ref = float(ref_vals.std(ddof=1) / math.sqrt(trials))
    mean_ok = abs(mean_ref - expected_ref) <= max(3 * se_ref, 1e-12)
    violation_rate = violations / trials if masks.size else 0.0
    # the asymptotic failure probability is o(1/n); 10% is a loose desk-scale gate
    rate_ok = violation_rate <= 0.10
    return MeasureReport(
        check="mu-d-subsets", n=n, d=d, K=dist.K, p1=dist.p1, trials=trials,
        passed=mean_ok and rate_ok,
        empirical_mean=mean_ref, theoretical_mean=expected_ref, std_err=se_ref,
        max_subset_ratio=max_ratio_seen, violation_rate=violation_rate,
        details={"mode": mode, "max_subset_size": max_size,
                 "mean_ok": mean_ok, "rate_ok": rate_ok},
    )


def overloaded_bins(dist: KeyDistribution, family: HashFamily) -> list[int]:
    """Bins whose single-bin measure mu_1({j}) reaches 3e/n (diagnostic)."""
    keys = np.arange(dist.K, dtype=np.uint64)
    h1 = family.eval_many(0, keys)
    per_bin = np.bincount(h1, weights=dist.probs, minlength=family.n)
    threshold = 3 * math.e / family.n
    return [int(j) for j in np.nonzero(per_bin >= threshold)[0]]


# --- expander-graph restatement -------------------------------------------

def subset_ratio_property(dist: KeyDistribution, family: HashFamily,
                          eps: float = 1e-12) -> bool:
    """True iff mu_d(B) <= |B|/n for every B with |B| <= n/5 (via mu sums)."""
    n = family.n
    max_size = n // 5
    if max_size == 0:
        return True
    keymask = _key_choice_masks(family, dist.K)
    for k in range(1, max_size + 1):
        for combo in combinations(range(n), k):
            bmask = np.uint64(sum(1 << b for b in combo))
            mu = dist.probs[(keymask & ~bmask) == 0].sum()
            if mu * n > k + eps:
                return False
    return True


def expansion_property(dist: KeyDistribution, family: HashFamily,
                       eps: float = 1e-12) -> bool:
    """Same property computed on the explicit bipartite key-bin graph.

    Build adjacency sets key -> bin choices and test, for every candidate
    neighbourhood B, the key set A_B = {keys with all choices inside B}:
    the property fails iff |Gamma(A_B)| <= n/5 and |Gamma(A_B)| < n * p(A_B).
    Violating key sets of any other shape reduce to this form.
    """
    n = family.n
    max_size = n // 5
    adjacency = []
    for k in range(dist.K):
        mask = 0
        for b in family.choices(k):
            mask |= 1 << b
        adjacency.append(mask)
    adj = np.asarray(adjacency, dtype=np.uint64)
    candidates = np.arange(1, 1 << n, dtype=np.uint64)
    contained = (adj[None, :] & ~candidates[:, None]) == 0
    weights = contained.astype(np.float64) @ dist.probs
    gammas = np.bitwise_or.reduce(np.where(contained, adj[None, :], np.uint64(0)), axis=1)
    gamma_sizes = np.array([bin(int(g)).count("1") for g in gammas])
    bad = (gamma_sizes <= max_size) & (n * weights > gamma_sizes + eps) & (gammas != 0)
    return not bool(bad.any())


def verify_expander_equiv(instances: int = 50, max_n: int = 12, max_K: int = 60,
                          d: int = 2, master_seed: int = 0) -> MeasureReport:
    """Boolean-for-Boolean agreement of the two property computations."""
    rng = np.random.default_rng(derive_seed(master_seed, 424242))
    agree = 0
    holds = 0
    for t in range(instances):
        n = int(rng.integers(5, max_n + 1))
        K = int(rng.integers(n, max_K + 1))
        weights = rng.random(K) + 1e-3
        probs = np.sort(weights / weights.sum())[::-1]
        dist = KeyDistribution(probs)
        fam = HashFamily(d, n, derive_seed(master_seed, 900_000 + t))
        a = subset_ratio_property(dist, fam)
        b = expansion_property(dist, fam)
        agree += a == b
        holds += a
    return MeasureReport(
        check="expander-equiv", n=max_n, d=d, K=max_K, p1=float("nan"),
        trials=instances, passed=agree == instances,
        violation_rate=1 - holds / instances,
        details={"agreements": agree},
    )


# --- imbalance scaling -----------------------------------------------------

@dataclass
class ScalingReport:
    d: int
    ns: list
    medians: list  # R(n) = I(m) / (m/n), median over seeds
    normalized: list  # R(n) / (ln n / ln ln n), meaningful for d = 1
    verdict: str
    passed: bool
    seeds: int
    ratio_gate: float

    def to_dict(self) -> dict:
        return {
            "d": self.d, "ns": self.ns, "medians": self.medians,
            "normalized": self.normalized, "verdict": self.verdict,
            "passed": self.passed, "seeds": self.seeds,
        }


def fit_imbalance_scaling(ns: Sequence[int], d: int, seeds: int = 20,
                          master_seed: int = 0,
                          ratio_gate: float = 2.5) -> ScalingReport:
    """Run the greedy-d process on its tightness workload and judge scaling.

    Workload: uniform distribution over 5n keys (so p1 = 1/(5n)), m = n^2,
    single source, W = n bins. R(n) = I(m)/(m/n), median over seeds.
    d >= 2 passes when R(n) is bounded (max/min <= ratio_gate); d = 1 passes
    when R(n) grows with n and R(n)/(ln n / ln ln n) is bounded.
    """
    ns = sorted(set(int(n) for n in ns if n > 1))
    if len(ns) < 3:
        raise ValueError("need at least 3 distinct n > 1 to judge scaling")
    medians = []
    for n in ns:
        m = n * n
        dist = uniform_probs(5 * n)
        vals = []
        for s in range(seeds):
            stream = sample_stream(dist, m, derive_seed(master_seed, n * 10_000 + s))
            cfg = SimConfig(S=1, W=n, d=d, strategy="pkg-local",
                            seed=derive_seed(master_seed, n * 20_000 + s))
            res = sim_run(cfg, stream)
            vals.append(res.final_imbalance / (m / n))
        medians.append(float(np.median(vals)))
    norm_factor = [math.log(n) / math.log(math.log(n)) for n in ns]
    normalized = [r / f for r, f in zip(medians, norm_factor)]
    if d >= 2:
        spread = max(medians) / max(min(medians), 1e-12)
        passed = spread <= ratio_gate
        verdict = "PASS-d2" if passed else "FAIL-d2"
    else:
        growing = medians[-1] > medians[0]
        spread = max(normalized) / max(min(normalized), 1e-12)
        passed = growing and spread <= ratio_gate
        verdict = "PASS-d1" if passed else "FAIL-d1"
    return ScalingReport(d=d, ns=ns, medians=medians, normalized=normalized,
                         verdict=verdict, passed=passed, seeds=seeds,
                         ratio_gate=ratio_gate)
