"""Command-line front end.

Subcommands:
    run         one experiment from a JSON config file
    sweep       grid over d / T / policy around a base config
    lowerbound  hard-instance experiment against the known-L policy
    validate    calibration-bound suites and the Markov hitting-time check
    slope       post-hoc tail slope of an existing results file
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .harness import (
    RunConfig,
    aggregate,
    default_tail_len,
    emit_results,
    fit_tail_slope,
    run_and_emit,
    run_experiment,
    validate_lemma_bounds,
    validate_markov,
)


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = RunConfig.from_json(args.config)
    if args.out:
        cfg = replace(cfg, out_path=args.out)
    agg = run_and_emit(cfg)
    print(f"policy={cfg.policy} d={cfg.d} T={cfg.T} reps={cfg.repetitions} "
          f"final_mean_cum_regret={agg.final_mean_cum_regret:.4f} "
          f"tail_slope={agg.tail_slope}")
    if cfg.out_path:
        print(f"wrote {cfg.out_path} and {cfg.out_path}.meta")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    base = RunConfig.from_json(args.config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for policy in args.policy:
        for d in args.d:
            for T in args.T:
                name = f"{policy}_d{d}_T{T}.csv"
                cfg = replace(base, policy=policy, d=d, T=T,
                              out_path=str(out_dir / name))
                agg = run_and_emit(cfg)
                print(f"{name}: final={agg.final_mean_cum_regret:.4f} "
                      f"slope={agg.tail_slope}")
    return 0


def _cmd_lowerbound(args: argparse.Namespace) -> int:
    cfg = RunConfig(policy="known-L", env={"kind": "hard"}, d=args.d, T=args.T,
                    L=args.L, seed=args.seed, repetitions=args.samples,
                    out_path=args.out)
    agg = run_and_emit(cfg)
    floor = 0.5 * args.L * args.T ** ((args.d - 1) / args.d)
    print(f"hard instances: samples={args.samples} "
          f"mean_final_regret={agg.final_mean_cum_regret:.4f} "
          f"theory_floor={floor:.4f}")
    return 0 if agg.final_mean_cum_regret >= 0.8 * floor else 1


def _cmd_validate(args: argparse.Namespace) -> int:
    ok = True
    for N in args.markov_N:
        mean, se = validate_markov(N, args.trials, args.seed)
        good = mean <= 4.0 * N + 3.0 * se
        ok &= good
        print(f"markov N={N}: mean_hitting_time={mean:.3f} stderr={se:.4f} "
              f"bound={4 * N} -> {'ok' if good else 'VIOLATION'}")
    for policy, runs in (("known-L", args.runs), ("unknown-L", args.runs)):
        violations = 0
        checks = 0
        for i in range(runs):
            cfg = RunConfig(policy=policy, env={"kind": "quadratic"}, d=args.d,
                            T=args.T, L=1.0, seed=args.seed + i, repetitions=1)
            report = validate_lemma_bounds(cfg)
            checks += len(report.checks)
            violations += len(report.violations)
        ok &= violations == 0
        print(f"{policy} region-cap checks: runs={runs} nodes={checks} "
              f"violations={violations} -> {'ok' if violations == 0 else 'VIOLATION'}")
    return 0 if ok else 1


def _cmd_slope(args: argparse.Namespace) -> int:
    ts, means = [], []
    with open(args.file, encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("t,"):
            raise ValueError(f"{args.file}: not a results file")
        for line in fh:
            if line.strip():
                parts = line.split(",")
                ts.append(int(parts[0]))
                means.append(float(parts[1]))
    ts_arr = np.asarray(ts)
    tail = args.tail or default_tail_len(int(ts_arr[-1]))
    mask = ts_arr > ts_arr[-1] - tail
    window = np.asarray(means)[mask]
    if np.any(window <= 0):
        print("nonpositive regret in tail window: slope undefined")
        return 1
    slope, _ = np.polyfit(np.log(ts_arr[mask]), np.log(window), 1)
    print(f"tail_slope={float(slope):.6f} (tail={tail} rounds)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tradelab",
                                description="Contextual bilateral-trade simulation lab")
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="run one config")
    pr.add_argument("--config", required=True)
    pr.add_argument("--out", default=None)
    pr.set_defaults(fn=_cmd_run)

    ps = sub.add_parser("sweep", help="grid over d / T / policy")
    ps.add_argument("--config", required=True)
    ps.add_argument("--d", type=int, nargs="+", required=True)
    ps.add_argument("--T", type=int, nargs="+", required=True)
    ps.add_argument("--policy", nargs="+", default=["known-L", "unknown-L"])
    ps.add_argument("--out-dir", required=True)
    ps.set_defaults(fn=_cmd_sweep)

    pl = sub.add_parser("lowerbound", help="hard-instance experiment")
    pl.add_argument("--L", type=float, default=1.0)
    pl.add_argument("--T", type=int, default=10_000)
    pl.add_argument("--d", type=int, default=2)
    pl.add_argument("--samples", type=int, default=50)
    pl.add_argument("--seed", type=int, default=0)
    pl.add_argument("--out", default=None)
    pl.set_defaults(fn=_cmd_lowerbound)

    pv = sub.add_parser("validate", help="claim validation suites")
    pv.add_argument("--markov-N", type=int, nargs="+", default=[1, 4, 16, 64])
    pv.add_argument("--trials", type=int, default=100_000)
    pv.add_argument("--runs", type=int, default=20)
    pv.add_argument("--d", type=int, default=2)
    pv.add_argument("--T", type=int, default=20_000)
    pv.add_argument("--seed", type=int, default=0)
    pv.set_defaults(fn=_cmd_validate)

    pf = sub.add_parser("slope", help="tail slope of a results file")
    pf.add_argument("--file", required=True)
    pf.add_argument("--tail", type=int, default=None)
    pf.set_defaults(fn=_cmd_slope)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
