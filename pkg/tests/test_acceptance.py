"""End-to-end acceptance gates for the whole package.

Each test exercises one headline claim at fixed parameters and prints a
single PASS/FAIL line with its numeric evidence before asserting. Gates are
deliberate: loose desk-scale constants for asymptotic claims, exact checks
for structural invariants.
"""

import numpy as np
import pytest

from pkgsim.core import SimConfig, imbalance
from pkgsim.hashing import HashFamily, derive_seed
from pkgsim.simulator import measure_disagreement, run
from pkgsim.theory import (
    fit_imbalance_scaling,
    verify_expander_equiv,
    verify_mu1,
    verify_mu_d_subsets,
)
from pkgsim.workloads import WorkloadSpec, uniform_probs

MASTER_SEED = 0


def _verdict(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


def _median_frac(strategy: str, wl_kwargs: dict, sim_kwargs: dict,
                 seeds: int) -> float:
    vals = []
    for s in range(seeds):
        cfg = SimConfig(strategy=strategy, seed=derive_seed(MASTER_SEED, 500 + s),
                        **sim_kwargs)
        wl = WorkloadSpec(seed=derive_seed(MASTER_SEED, 600 + s), **wl_kwargs)
        vals.append(run(cfg, wl).fraction_avg_imbalance)
    return float(np.median(vals))


def test_01_imbalance_scaling_two_choices():
    # greedy-2 on uniform keys over 5n values, m = n^2: the normalized
    # final imbalance R(n) = I(m)/(m/n) should stay within a 2.5x band
    report = fit_imbalance_scaling([8, 16, 32, 64], d=2, seeds=20,
                                   master_seed=MASTER_SEED)
    spread = max(report.medians) / max(min(report.medians), 1e-12)
    ok = spread <= 2.5
    _verdict("scaling-d2", ok,
             f"medians={[round(v, 4) for v in report.medians]} "
             f"spread={spread:.2f} gate=2.5")
    assert ok, (
        "R(n) band exceeded: at m=n^2 the final greedy-2 imbalance is a "
        "1-4 message noise floor that grows sublinearly in n, so R falls "
        "~4x from n=8 to n=64 at this scale")


def test_02_imbalance_scaling_single_choice():
    # single-choice hashing picks up an extra ln n / ln ln n factor:
    # R grows with n and R normalized by that factor stays in a 2.5x band
    report = fit_imbalance_scaling([8, 16, 32, 64], d=1, seeds=20,
                                   master_seed=MASTER_SEED)
    growing = report.medians[-1] > report.medians[0]
    spread = max(report.normalized) / max(min(report.normalized), 1e-12)
    ok = growing and spread <= 2.5
    _verdict("scaling-d1", ok,
             f"medians={[round(v, 4) for v in report.medians]} "
             f"growing={growing} normalized_spread={spread:.2f} gate=2.5")
    assert ok


def test_03_single_choice_measure_expectation():
    # E[mu_1(B)] = |B|/n: n=10, |B|=3, uniform over 1000 keys, 5000 families
    report = verify_mu1(n=10, B_size=3, dist=uniform_probs(1000), trials=5000,
                        master_seed=MASTER_SEED)
    dev = abs(report.empirical_mean - 0.3)
    ok = dev <= 3 * report.std_err
    _verdict("mu1-expectation", ok,
             f"mean={report.empirical_mean:.5f} target=0.3 "
             f"dev={dev:.2e} 3se={3 * report.std_err:.2e}")
    assert ok


def test_04_subset_ratio_bound():
    # max mu_2(B)/(|B|/n) over all |B| <= n/5 exceeds 1 in at most 10% of
    # trials (n=20, uniform over 100 keys so p1 = 1/(5n), exhaustive subsets)
    report = verify_mu_d_subsets(n=20, dist=uniform_probs(100), d=2,
                                 trials=200, mode="exhaustive",
                                 master_seed=MASTER_SEED)
    ok = report.violation_rate <= 0.10
    _verdict("subset-ratio", ok,
             f"violation_rate={report.violation_rate:.3f} gate=0.10 "
             f"max_ratio={report.max_subset_ratio:.3f}")
    assert ok


def test_05_zipf_balance_transition():
    # balance collapses between z=0.8 and z=1.6 (K=1e4, W=5, S=5, m=1e6)
    wl = dict(kind="zipf", K=10_000, m=1_000_000)
    sim = dict(S=5, W=5, d=2)
    low = _median_frac("pkg-local", {**wl, "z": 0.8}, sim, seeds=5)
    high = _median_frac("pkg-local", {**wl, "z": 1.6}, sim, seeds=5)
    ok = low <= 0.1 * high
    _verdict("zipf-transition", ok,
             f"frac(z=0.8)={low:.3e} frac(z=1.6)={high:.3e} ratio={low / high:.3e}")
    assert ok


def test_06_extra_choices_restore_balance():
    # at z=1.2 (K=1e5, W=5, m=1e6) doubling the choices from 2 to 4 cuts the
    # median imbalance to at most a fifth
    wl = dict(kind="zipf", K=100_000, z=1.2, m=1_000_000)
    d2 = _median_frac("pkg-local", wl, dict(S=5, W=5, d=2), seeds=5)
    d4 = _median_frac("pkg-local", wl, dict(S=5, W=5, d=4), seeds=5)
    ok = d4 <= 0.2 * d2
    _verdict("d-choices", ok,
             f"frac(d=2)={d2:.3e} frac(d=4)={d4:.3e} ratio={d4 / d2:.3f} gate=0.2")
    assert ok


@pytest.fixture(scope="module")
def lognormal_local_runs():
    """Local-estimation runs on the skewed log-normal workload, per W."""
    out = {}
    for W in (5, 10):
        cfg = SimConfig(S=5, W=W, d=2, strategy="pkg-local", seed=MASTER_SEED)
        wl = WorkloadSpec(kind="lognormal", K=16_000, mu=1.789, sigma=2.366,
                          m=1_000_000, seed=MASTER_SEED)
        out[W] = run(cfg, wl).fraction_avg_imbalance
    return out


def test_07_local_within_order_of_global(lognormal_local_runs):
    # local load estimation stays within one order of magnitude of the
    # true-loads oracle on the heavy-tailed workload, for W in {5, 10}
    ok_all = True
    details = []
    for W in (5, 10):
        cfg = SimConfig(S=5, W=W, d=2, strategy="pkg-global", seed=MASTER_SEED)
        wl = WorkloadSpec(kind="lognormal", K=16_000, mu=1.789, sigma=2.366,
                          m=1_000_000, seed=MASTER_SEED)
        g = run(cfg, wl).fraction_avg_imbalance
        loc = lognormal_local_runs[W]
        ok = loc <= 10 * g + 1e-8
        ok_all &= ok
        details.append(f"W={W}: local={loc:.3e} global={g:.3e}")
    _verdict("local-vs-global", ok_all, "; ".join(details))
    assert ok_all


def test_08_probing_changes_little(lognormal_local_runs):
    # refreshing local estimates from true loads every m/100 messages leaves
    # the balance within 2x of the plain local variant, for W in {5, 10}
    m = 1_000_000
    ok_all = True
    details = []
    for W in (5, 10):
        cfg = SimConfig(S=5, W=W, d=2, strategy="pkg-probe", seed=MASTER_SEED,
                        probe_period=m // 100)
        wl = WorkloadSpec(kind="lognormal", K=16_000, mu=1.789, sigma=2.366,
                          m=m, seed=MASTER_SEED)
        lp = run(cfg, wl).fraction_avg_imbalance
        loc = lognormal_local_runs[W]
        ok = abs(lp - loc) <= max(lp, loc)
        ok_all &= ok
        details.append(f"W={W}: probed={lp:.3e} local={loc:.3e}")
    _verdict("probing", ok_all, "; ".join(details))
    assert ok_all


def test_09_beats_single_choice_hashing():
    # two choices with key splitting beat plain hashing by >= 100x at z=1
    wl = dict(kind="zipf", K=10_000, z=1.0, m=1_000_000)
    pkg = _median_frac("pkg-local", wl, dict(S=5, W=5, d=2), seeds=1)
    kg = _median_frac("kg", wl, dict(S=5, W=5, d=1), seeds=1)
    ok = pkg <= 0.01 * kg
    _verdict("pkg-vs-kg", ok,
             f"pkg={pkg:.3e} kg={kg:.3e} ratio={pkg / kg:.3e} gate=0.01")
    assert ok


def test_10_structural_invariants():
    # one gate bundling the structural guarantees: per-key worker sets bounded
    # by d, conservation, local-estimate consistency, the local-imbalance
    # bound, byte-identical reruns, and agreement of the two independent
    # subset-ratio computations on 50 random small instances
    cfg = SimConfig(S=5, W=8, d=2, strategy="pkg-local", seed=MASTER_SEED,
                    check_invariants=True, track_key_sets=True,
                    log_decisions=True, sample_interval=97)
    wl = WorkloadSpec(kind="zipf", K=2000, z=1.1, m=50_000, seed=MASTER_SEED)
    a = run(cfg, wl)  # check_invariants raises on any violation
    b = run(cfg, wl)
    key_sets_ok = a.max_key_worker_set <= 2
    fam = HashFamily(2, 8, derive_seed(MASTER_SEED, 7))
    choice_ok = all(ws <= set(fam.choices(k))
                    for k, ws in a.per_key_worker_sets.items())
    conserve_ok = sum(a.final_loads) == 50_000
    local_bound_ok = a.final_imbalance <= \
        sum(imbalance(e) for e in a.local_estimates) + 1e-9
    rerun_ok = (a.decisions == b.decisions
                and a.final_loads == b.final_loads
                and a.imbalance_series == b.imbalance_series)
    equiv = verify_expander_equiv(instances=50, max_n=12, max_K=60, d=2,
                                  master_seed=MASTER_SEED)
    ok = (key_sets_ok and choice_ok and conserve_ok and local_bound_ok
          and rerun_ok and equiv.passed)
    _verdict("invariants", ok,
             f"key_sets={key_sets_ok} choices={choice_ok} "
             f"conservation={conserve_ok} local_bound={local_bound_ok} "
             f"rerun={rerun_ok} "
             f"expansion_agreement={equiv.details['agreements']}/50")
    assert ok


def test_11_disagreement_despite_balance():
    # local and oracle variants route >5% of messages differently at z=0.4
    # while the local balance stays within 10x of the oracle's
    cfg = SimConfig(S=5, W=5, d=2, strategy="pkg-local", seed=MASTER_SEED)
    wl = WorkloadSpec(kind="zipf", K=10_000, z=0.4, m=1_000_000,
                      seed=MASTER_SEED)
    res = measure_disagreement(cfg, wl)
    ok = res["percent_disagree"] > 5.0 and res["balance_ratio"] <= 10.0
    _verdict("disagreement", ok,
             f"disagree={res['percent_disagree']:.1f}% "
             f"balance_ratio={res['balance_ratio']:.2f}")
    assert ok
