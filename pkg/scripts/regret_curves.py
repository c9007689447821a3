"""Run a config, then print growth ratios and final regret per algorithm.

    python3 scripts/regret_curves.py configs/single_sphere.ini --out results/single
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ldp_bandit.config import load_config
from ldp_bandit.runner import growth_metric, run_experiment


@dataclass
class Args:
    config: Path
    out: Path
    parallelism: int = 1
    replications: int | None = None


def parse_args() -> Args:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("config", type=Path)
    p.add_argument("--out", type=Path, default=Path("results"))
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--replications", type=int, help="override the config's replication count")
    return Args(**vars(p.parse_args()))


def main() -> None:
    args = parse_args()
    cfg = load_config(args.config)
    if args.replications:
        from dataclasses import replace

        cfg = replace(cfg, replications=args.replications)
    res = run_experiment(cfg, args.out, parallelism=args.parallelism)
    T = cfg.T - cfg.T % 2
    by_algo: dict[str, list] = {}
    for tr in res.traces:
        by_algo.setdefault(tr.algo, []).append(tr)
    print(f"{'algo':<28}{'mean Reg(T)':>14}{'std':>10}{'Reg(T)/Reg(T/2)':>18}")
    for algo, traces in by_algo.items():
        totals = np.array([tr.regret_at(T) for tr in traces])
        try:
            growth = np.mean([growth_metric(tr, T) for tr in traces])
        except ValueError:
            growth = float("nan")  # T/2 not on the logged grid
        std = totals.std(ddof=1) if totals.size > 1 else 0.0
        print(f"{algo:<28}{totals.mean():>14.1f}{std:>10.1f}{growth:>18.3f}")
    print(f"curves: {res.csv_path}\nbands:  {res.summary_path}")
    if res.failures:
        print(f"{len(res.failures)} failed replication(s), see {args.out / 'failures.txt'}")


if __name__ == "__main__":
    main()
