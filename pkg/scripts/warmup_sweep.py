"""Sweep the warm-up length s0 on the separated multi-parameter preset.

For each s0 this reports the mean growth ratio Reg(T)/Reg(T/2) and in how many
seeds the always-sub-optimal arm was played after warm-up.

    python3 scripts/warmup_sweep.py --s0 auto 2000 8333 --seeds 10
"""

from __future__ import annotations

import argparse
import time
from dataclasses import dataclass, field

import numpy as np

from ldp_bandit.acceptance import multi_separated_run
from ldp_bandit.runner import replication_seed


@dataclass
class SweepConfig:
    s0_values: list = field(default_factory=lambda: [None, 2000, 8333])
    seeds: int = 10
    T: int = 100_000


def parse_args() -> SweepConfig:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--s0", nargs="+", default=["auto", "2000", "8333"])
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--T", type=int, default=100_000)
    a = p.parse_args()
    s0 = [None if v == "auto" else int(v) for v in a.s0]
    return SweepConfig(s0, a.seeds, a.T)


def main() -> None:
    cfg = parse_args()
    print(f"{'s0':>8}{'mean growth':>14}{'clean seeds':>14}{'sub-arm plays':>30}{'s/run':>8}")
    for s0 in cfg.s0_values:
        start = time.perf_counter()
        runs = [multi_separated_run(replication_seed(0, r), s0, cfg.T) for r in range(cfg.seeds)]
        per_run = (time.perf_counter() - start) / cfg.seeds
        growth = np.mean([r[0] for r in runs])
        clean = sum(r[1] == 0 for r in runs)
        plays = ",".join(str(r[1]) for r in runs)
        print(f"{runs[0][2]:>8}{growth:>14.3f}{clean:>11}/{cfg.seeds:<2}{plays:>30}{per_run:>8.1f}")


if __name__ == "__main__":
    main()
