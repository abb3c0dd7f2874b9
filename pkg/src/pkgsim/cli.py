"""Command-line front end.

Subcommands: simulate (one run), sweep (parameter grids), verify (theory
checks), disagreement (local vs global decision studies), report
(re-aggregate existing CSVs).

Conventions: every output file embeds the fully resolved configuration and
master seed in a leading '# config: {...}' comment line, CSV headers are
lowercase snake_case with '.' decimals, and exit codes are 0 for
success/PASS, 1 for a verification FAIL, 2 for usage or configuration
errors, 3 for I/O failures. The default output directory can be set with
the PKGSIM_OUT_DIR environment variable.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from .core import SimConfig, STRATEGIES
from .simulator import (
    ConfigError,
    aggregate_rows,
    measure_disagreement,
    run,
    sweep,
)
from .theory import (
    fit_imbalance_scaling,
    verify_expander_equiv,
    verify_mu1,
    verify_mu_d_subsets,
)
from .workloads import WorkloadSpec, uniform_probs

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_IO = 3

_SIM_KEYS = {
    "strategy", "workers", "sources", "d", "seed", "messages", "keys",
    "workload", "zipf_z", "lognormal_mu", "lognormal_sigma", "path",
    "probe_period", "sample_interval", "dispatch", "log_decisions",
    "out_dir", "prefix",
}
_SWEEP_AXES = {"strategy", "workers", "d", "zipf_z", "keys", "messages",
               "probe_period", "lognormal_mu", "lognormal_sigma", "workload"}
_SWEEP_KEYS = _SIM_KEYS | _SWEEP_AXES | {"seeds", "out", "parallel"}


def _load_config(path: str, allowed: set) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise IOError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping")
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    return data


def _out_dir(value) -> Path:
    path = Path(value or os.environ.get("PKGSIM_OUT_DIR", "."))
    path.mkdir(parents=True, exist_ok=True)
    return path


def _merged(args: argparse.Namespace, allowed: set) -> dict:
    cfg = _load_config(args.config, allowed) if getattr(args, "config", None) else {}
    for key in allowed:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _make_spec(cfg: dict, seed: int) -> WorkloadSpec:
    kind = cfg.get("workload", "zipf")
    return WorkloadSpec(
        kind=kind,
        K=int(cfg.get("keys", 1000)),
        z=float(cfg.get("zipf_z", 1.0)),
        mu=float(cfg.get("lognormal_mu", 1.789)),
        sigma=float(cfg.get("lognormal_sigma", 2.366)),
        m=int(cfg.get("messages", 100_000)),
        path=cfg.get("path"),
        seed=seed,
    )


def _make_sim_config(cfg: dict, seed: int) -> SimConfig:
    return SimConfig(
        S=int(cfg.get("sources", 1)),
        W=int(cfg.get("workers", 1)),
        d=int(cfg.get("d", 2)),
        strategy=cfg.get("strategy", "pkg-local"),
        seed=seed,
        probe_period=(int(cfg["probe_period"]) if cfg.get("probe_period") else None),
        sample_interval=(int(cfg["sample_interval"]) if cfg.get("sample_interval") else None),
        dispatch=cfg.get("dispatch", "rr"),
        log_decisions=bool(cfg.get("log_decisions", False)),
    )


def _config_header(cfg: dict) -> str:
    return "# config: " + json.dumps(cfg, sort_keys=True, default=str)


def _write_csv(path: Path, header_cfg: dict, fieldnames: list, rows: list) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_config_header(header_cfg) + "\n")
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in fieldnames})


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _merged(args, _SIM_KEYS)
    seed = int(cfg.get("seed", 0))
    config = _make_sim_config(cfg, seed)
    spec = _make_spec(cfg, seed)
    result = run(config, spec)

    out_dir = _out_dir(cfg.get("out_dir"))
    prefix = cfg.get("prefix", "simulate")
    resolved = {"command": "simulate", "master_seed": seed,
                "config": config.to_dict(), "workload": spec.to_dict()}

    summary = result.summary()
    summary.pop("wall_time", None)  # keep outputs byte-identical across reruns
    summary["resolved"] = resolved
    with open(out_dir / f"{prefix}_summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    avg_rows = []
    for t, imb in result.imbalance_series:
        avg = t / config.W
        avg_rows.append({"t": t, "imbalance": imb, "max_load": imb + avg, "avg_load": avg})
    _write_csv(out_dir / f"{prefix}_series.csv", resolved,
               ["t", "imbalance", "max_load", "avg_load"], avg_rows)
    print(f"fraction_avg_imbalance {result.fraction_avg_imbalance:.12g}")
    return EXIT_OK


def _as_list(value) -> list:
    return list(value) if isinstance(value, (list, tuple)) else [value]


def _sweep_jobs(cfg: dict) -> list:
    axes = {k: _as_list(cfg[k]) for k in sorted(_SWEEP_AXES) if k in cfg}
    seeds = _as_list(cfg.get("seeds", [0]))
    names = list(axes)
    jobs = []
    for combo in itertools.product(*(axes[k] for k in names)):
        point = dict(cfg)
        point.update(dict(zip(names, combo)))
        for seed in seeds:
            jobs.append((_make_sim_config(point, int(seed)), _make_spec(point, int(seed))))
    return jobs


def _run_job(job):
    return sweep([job])[0]


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _merged(args, _SWEEP_KEYS)
    jobs = _sweep_jobs(cfg)
    parallel = int(cfg.get("parallel", 1))
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            rows = list(pool.map(_run_job, jobs))
    else:
        rows = [_run_job(job) for job in jobs]

    out = Path(cfg.get("out", "sweep.csv"))
    out_dir = _out_dir(cfg.get("out_dir"))
    out = out if out.is_absolute() else out_dir / out
    resolved = {"command": "sweep", "config": cfg}
    fieldnames = sorted({k for row in rows for k in row})
    _write_csv(out, resolved, fieldnames, rows)

    group_keys = [k for k in ("strategy", "W", "d", "z", "K", "m", "kind",
                              "probe_period") if any(k in r for r in rows)]
    agg = aggregate_rows(rows, group_keys)
    agg_path = out.with_suffix(".agg.csv")
    agg_fields = group_keys + ["fraction_avg_imbalance_median",
                               "fraction_avg_imbalance_min",
                               "fraction_avg_imbalance_max", "trials"]
    _write_csv(agg_path, resolved, agg_fields, agg)
    print(f"wrote {len(rows)} rows to {out} and {len(agg)} aggregated rows to {agg_path}")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    seed = args.seed
    if args.check == "mu1":
        report = verify_mu1(n=args.n, B_size=args.bsize,
                            dist=uniform_probs(args.keys),
                            trials=args.trials, lam=args.lam, master_seed=seed)
    elif args.check == "mu-d-subsets":
        report = verify_mu_d_subsets(n=args.n, dist=uniform_probs(args.keys),
                                     d=args.d, trials=args.trials,
                                     mode=args.mode,
                                     subsets_per_size=args.subsets_per_size,
                                     master_seed=seed)
    elif args.check == "expander-equiv":
        report = verify_expander_equiv(instances=args.instances, max_n=args.max_n,
                                       max_K=args.max_keys, d=args.d,
                                       master_seed=seed)
    elif args.check == "scaling":
        ns = [int(x) for x in args.ns.split(",")]
        report = fit_imbalance_scaling(ns, d=args.d, seeds=args.seeds_per_point,
                                       master_seed=seed)
        print(json.dumps(report.to_dict()))
        print(report.verdict)
        return EXIT_OK if report.passed else EXIT_FAIL
    else:
        raise ConfigError(f"unknown check {args.check!r}")
    print(json.dumps(report.to_dict(), default=float))
    print("PASS" if report.passed else "FAIL")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_disagreement(args: argparse.Namespace) -> int:
    zs = [float(z) for z in args.zs.split(",")]
    sources = [int(s) for s in args.sources.split(",")]
    rows = []
    for z in zs:
        for S in sources:
            d = min(args.d, args.workers)
            config = SimConfig(S=S, W=args.workers, d=d, strategy="pkg-local",
                               seed=args.seed)
            spec = WorkloadSpec(kind="zipf", K=args.keys, z=z, m=args.messages,
                                seed=args.seed)
            res = measure_disagreement(config, spec)
            rows.append({"z": z, "sources": S, "workers": args.workers,
                         "percent_disagree": res["percent_disagree"],
                         "balance_ratio": res["balance_ratio"],
                         "fraction_avg_imbalance_local": res["fraction_avg_imbalance_local"],
                         "fraction_avg_imbalance_global": res["fraction_avg_imbalance_global"]})
    out = Path(args.out) if args.out else _out_dir(None) / "disagreement.csv"
    resolved = {"command": "disagreement", "master_seed": args.seed,
                "zs": zs, "sources": sources, "workers": args.workers,
                "keys": args.keys, "messages": args.messages, "d": args.d}
    _write_csv(out, resolved, list(rows[0].keys()), rows)
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    rows = []
    for path in args.input:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                lines = [ln for ln in fh if not ln.startswith("#")]
        except OSError as exc:
            raise IOError(str(exc)) from exc
        rows.extend(csv.DictReader(lines))
    group_keys = args.group_by.split(",")
    value = args.value
    clean = []
    for row in rows:
        if row.get("error"):
            continue
        try:
            row[value] = float(row[value])
        except (KeyError, ValueError):
            continue
        clean.append(row)
    agg = aggregate_rows(clean, group_keys, value_key=value)
    out = Path(args.out) if args.out else _out_dir(None) / "report.csv"
    fields = group_keys + [f"{value}_median", f"{value}_min", f"{value}_max", "trials"]
    _write_csv(out, {"command": "report", "inputs": list(args.input)}, fields, agg)
    print(f"wrote {len(agg)} aggregated rows to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pkgsim")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one simulation")
    sim.add_argument("--config")
    sim.add_argument("--strategy", choices=STRATEGIES)
    sim.add_argument("--workers", type=int)
    sim.add_argument("--sources", type=int)
    sim.add_argument("--d", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--messages", type=int)
    sim.add_argument("--keys", type=int)
    sim.add_argument("--workload", choices=("zipf", "lognormal", "uniform", "trace", "graph-edges"))
    sim.add_argument("--zipf-z", dest="zipf_z", type=float)
    sim.add_argument("--lognormal-mu", dest="lognormal_mu", type=float)
    sim.add_argument("--lognormal-sigma", dest="lognormal_sigma", type=float)
    sim.add_argument("--path", help="trace or edge-list file")
    sim.add_argument("--probe-period", dest="probe_period", type=int)
    sim.add_argument("--sample-interval", dest="sample_interval", type=int)
    sim.add_argument("--dispatch", choices=("rr", "kg", "shuffle"))
    sim.add_argument("--log-decisions", dest="log_decisions", action="store_const", const=True)
    sim.add_argument("--out-dir", dest="out_dir")
    sim.add_argument("--prefix")
    sim.set_defaults(func=cmd_simulate)

    sw = sub.add_parser("sweep", help="run a parameter grid")
    sw.add_argument("--config", required=True)
    sw.add_argument("--parallel", type=int)
    sw.add_argument("--out")
    sw.add_argument("--out-dir", dest="out_dir")
    sw.set_defaults(func=cmd_sweep)

    ver = sub.add_parser("verify", help="run a theory check")
    ver.add_argument("check", choices=("mu1", "mu-d-subsets", "scaling", "expander-equiv"))
    ver.add_argument("--n", type=int, default=10)
    ver.add_argument("--bsize", type=int, default=3)
    ver.add_argument("--keys", type=int, default=1000)
    ver.add_argument("--trials", type=int, default=1000)
    ver.add_argument("--lambda", dest="lam", type=float, default=math.e)
    ver.add_argument("--d", type=int, default=2)
    ver.add_argument("--mode", choices=("exhaustive", "sampled"), default="exhaustive")
    ver.add_argument("--subsets-per-size", dest="subsets_per_size", type=int, default=200)
    ver.add_argument("--ns", default="8,16,32,64")
    ver.add_argument("--seeds", dest="seeds_per_point", type=int, default=20)
    ver.add_argument("--instances", type=int, default=50)
    ver.add_argument("--max-n", dest="max_n", type=int, default=12)
    ver.add_argument("--max-keys", dest="max_keys", type=int, default=60)
    ver.add_argument("--seed", type=int, default=0)
    ver.set_defaults(func=cmd_verify)

    dis = sub.add_parser("disagreement", help="local vs global decision study")
    dis.add_argument("--zs", default="0.4")
    dis.add_argument("--sources", default="5")
    dis.add_argument("--workers", type=int, default=5)
    dis.add_argument("--keys", type=int, default=10_000)
    dis.add_argument("--messages", type=int, default=100_000)
    dis.add_argument("--d", type=int, default=2)
    dis.add_argument("--seed", type=int, default=0)
    dis.add_argument("--out")
    dis.set_defaults(func=cmd_disagreement)

    rep = sub.add_parser("report", help="re-aggregate existing result CSVs")
    rep.add_argument("--input", nargs="+", required=True)
    rep.add_argument("--group-by", dest="group_by", required=True)
    rep.add_argument("--value", default="fraction_avg_imbalance")
    rep.add_argument("--out")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IOError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
