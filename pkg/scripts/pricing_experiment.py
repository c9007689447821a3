"""Dynamic-pricing experiment on synthetic (or user-supplied) auto-loan data.

Without ``--csv`` a synthetic table is generated. Reports regret under both the
acceptance and expected-revenue metrics.

    python3 scripts/pricing_experiment.py --T 20000 --seeds 5
    python3 scripts/pricing_experiment.py --csv my_loans.csv
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass

import numpy as np

from ldp_bandit.envs import make_preset
from ldp_bandit.privacy import PrivacyBudget
from ldp_bandit.runner import replication_seed
from ldp_bandit.single import SingleAlgoConfig, run_single


@dataclass
class PricingRun:
    T: int = 20_000
    seeds: int = 5
    epsilons: tuple = (1.0, 5.0)
    csv: str = ""
    rows: int = 2000


def parse_args() -> PricingRun:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--T", type=int, default=20_000)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--eps", type=float, nargs="+", default=[1.0, 5.0])
    p.add_argument("--csv", default="", help="pricing CSV in the documented schema")
    p.add_argument("--rows", type=int, default=2000, help="synthetic rows when no CSV is given")
    a = p.parse_args()
    return PricingRun(a.T, a.seeds, tuple(a.eps), a.csv, a.rows)


def main() -> None:
    run = parse_args()
    print(f"{'metric':<12}{'algo':<18}{'mean Reg(T)':>14}{'per round':>12}")
    for metric in ("acceptance", "revenue"):
        env = make_preset("pricing_synthetic", rows=run.rows, csv_path=run.csv, regret_metric=metric)
        variants = [(f"sgd eps={e:g}", SingleAlgoConfig("private_sgd", PrivacyBudget(e), run.T)) for e in run.epsilons]
        variants.append(("sgd noiseless", SingleAlgoConfig("private_sgd", PrivacyBudget(1.0), run.T, noiseless=True)))
        for name, cfg in variants:
            totals = [run_single(cfg, env, replication_seed(0, s)).total_regret for s in range(run.seeds)]
            print(f"{metric:<12}{name:<18}{np.mean(totals):>14.1f}{np.mean(totals) / run.T:>12.4f}")


if __name__ == "__main__":
    main()
