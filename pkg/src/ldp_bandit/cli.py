"""Command-line entry point: ``run``, ``aggregate``, ``check``, ``synth-pricing``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config


def _run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed: must be a 64-bit unsigned integer")
        cfg = dataclasses.replace(cfg, base_seed=args.seed)
    from .runner import run_experiment

    result = run_experiment(cfg, args.out, parallelism=args.parallelism)
    print(f"wrote {result.csv_path} ({len(result.traces)} traces)")
    if result.summary_path is not None and result.summary_path.exists():
        print(f"wrote {result.summary_path}")
    if result.failures:
        print(f"{len(result.failures)} replication(s) failed; see failures.txt", file=sys.stderr)
        return 1
    return 0


def _aggregate(args) -> int:
    from .runner import aggregate, read_traces_csv, write_summary_csv

    write_summary_csv(aggregate(read_traces_csv(args.input)), args.out)
    print(f"wrote {args.out}")
    return 0


def _check(args) -> int:
    from .acceptance import run_suite

    results = run_suite(args.suite)
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} criteria passed")
    return 1 if failed else 0


def _synth_pricing(args) -> int:
    from .pricing import synth_pricing_rows, write_pricing_csv

    if args.rows < 1:
        raise ValueError("--rows must be positive")
    header, data = synth_pricing_rows(args.rows, np.random.default_rng(args.seed))
    write_pricing_csv(args.out, header, data)
    print(f"wrote {args.rows} rows to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ldp-bandit", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--seed", type=int, help="override experiment.base_seed")
    p.add_argument("--parallelism", type=int, default=1, help="worker processes (LDP_BANDIT_THREADS overrides)")
    p.set_defaults(func=_run)

    p = sub.add_parser("aggregate", help="summarize a regret CSV (mean, std per round)")
    p.add_argument("--in", dest="input", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=_aggregate)

    p = sub.add_parser("check", help="run acceptance criteria")
    p.add_argument("--suite", default="fast", help="all, fast, regret, perf, or numbers like 1,3,8")
    p.set_defaults(func=_check)

    p = sub.add_parser("synth-pricing", help="write a synthetic loan-pricing CSV")
    p.add_argument("--rows", required=True, type=int)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_synth_pricing)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
