"""Replication runner, long-format CSV output, aggregation and growth metrics."""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import AlgoSpec, ExperimentConfig, dump_config
from .multi import run_multi
from .records import RegretTrace
from .single import run_single

log = logging.getLogger(__name__)

CSV_COLUMNS = ("env", "algo", "epsilon", "delta", "rep", "t", "cum_regret")
SUMMARY_COLUMNS = ("env", "algo", "epsilon", "delta", "t", "mean", "std", "count", "lower", "upper")
THREADS_ENV = "LDP_BANDIT_THREADS"

_MASK64 = (1 << 64) - 1
# golden-ratio increment of splitmix64
SEED_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    z = (x + SEED_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def replication_seed(base_seed: int, rep: int) -> int:
    """Seed of replication ``rep``: ``splitmix64(base_seed + rep * SEED_GAMMA mod 2^64)``.

    Every algorithm of a replication shares this seed, so they see the same
    contexts and reward noise.
    """
    return splitmix64((base_seed + rep * SEED_GAMMA) & _MASK64)


def run_algo(spec: AlgoSpec, cfg: ExperimentConfig, seed: int) -> RegretTrace:
    env = cfg.make_env()
    algo_cfg = spec.build(cfg.T)
    run = run_multi if spec.is_multi else run_single
    return run(algo_cfg, env, seed, label=spec.name)


def _job(cfg: ExperimentConfig, algo_index: int, rep: int):
    spec = cfg.algos[algo_index]
    seed = replication_seed(cfg.base_seed, rep)
    try:
        return run_algo(spec, cfg, seed).logged(cfg.log_stride), None
    except Exception as exc:  # one failed replication must not abort the batch
        return None, f"{spec.name} rep={rep}: {exc!r}\n{traceback.format_exc()}"


def resolve_parallelism(requested: int | None) -> int:
    env_value = os.environ.get(THREADS_ENV)
    if env_value:
        return max(1, int(env_value))
    return max(1, requested or 1)


@dataclass
class ExperimentResult:
    traces: list[RegretTrace]
    failures: list[str] = field(default_factory=list)
    csv_path: Path | None = None
    summary_path: Path | None = None


def run_experiment(cfg: ExperimentConfig, out_dir=None, parallelism: int | None = None) -> ExperimentResult:
    """Run every (algorithm, replication) pair and optionally write the CSV outputs.

    Jobs are independent and results are collected in job order, so the output
    does not depend on ``parallelism``.
    """
    jobs = [(cfg, a, rep) for a in range(len(cfg.algos)) for rep in range(cfg.replications)]
    workers = resolve_parallelism(parallelism)
    if workers == 1 or len(jobs) == 1:
        outcomes = [_job(*j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_job, *zip(*jobs)))
    traces, failures = [], []
    for (_, a, rep), (trace, err) in zip(jobs, outcomes):
        if err is not None:
            log.error("replication failed: %s", err)
            failures.append(err)
            continue
        trace.info["rep"] = rep
        traces.append(trace)
    result = ExperimentResult(traces=traces, failures=failures)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        result.csv_path = out / cfg.output
        write_traces_csv(traces, result.csv_path)
        result.summary_path = result.csv_path.with_name(result.csv_path.stem + "_summary.csv")
        if traces:
            write_summary_csv(aggregate(traces), result.summary_path)
        (out / "config.resolved.ini").write_text(dump_config(cfg), encoding="utf-8")
        if failures:
            (out / "failures.txt").write_text("\n".join(failures), encoding="utf-8")
    return result


def fmt_float(x: float) -> str:
    """17 significant digits; ``inf`` for the noiseless budget."""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def traces_csv_text(traces) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for tr in traces:
        rep = tr.info.get("rep", 0)
        eps, delta = fmt_float(tr.epsilon), fmt_float(tr.delta)
        for t, c in zip(tr.t, tr.cum_regret):
            w.writerow((tr.env, tr.algo, eps, delta, rep, int(t), fmt_float(c)))
    return buf.getvalue()


def write_traces_csv(traces, path) -> None:
    Path(path).write_text(traces_csv_text(traces), encoding="utf-8", newline="")


def read_traces_csv(path) -> list[RegretTrace]:
    """Inverse of ``write_traces_csv`` (only the logged grid is recovered)."""
    groups: dict[tuple, list[tuple[int, float]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != CSV_COLUMNS:
            raise ValueError(f"{path}: expected columns {CSV_COLUMNS}, got {header}")
        for row in reader:
            env, algo, eps, delta, rep, t, cum = row
            groups.setdefault((env, algo, float(eps), float(delta), int(rep)), []).append((int(t), float(cum)))
    traces = []
    for (env, algo, eps, delta, rep), pts in groups.items():
        t, cum = (np.array(v) for v in zip(*pts))
        traces.append(
            RegretTrace(algo=algo, epsilon=eps, delta=delta, seed=-1, env=env, t=t.astype(np.int64),
                        cum_regret=cum.astype(float), chosen=np.zeros(0, dtype=np.int64), info={"rep": rep})
        )
    return traces


@dataclass
class SummaryRow:
    env: str
    algo: str
    epsilon: float
    delta: float
    t: int
    mean: float
    std: float
    count: int

    @property
    def lower(self) -> float:
        return self.mean - 0.5 * self.std

    @property
    def upper(self) -> float:
        return self.mean + 0.5 * self.std


def aggregate(traces) -> list[SummaryRow]:
    """Mean and sample std of cumulative regret per (env, algo, epsilon, delta) group and round."""
    groups: dict[tuple, list[RegretTrace]] = {}
    for tr in traces:
        groups.setdefault((tr.env, tr.algo, tr.epsilon, tr.delta), []).append(tr)
    rows = []
    for key, members in groups.items():
        grid = members[0].t
        for tr in members[1:]:
            if not np.array_equal(tr.t, grid):
                raise ValueError(f"misaligned round grids in group {key}")
        values = np.vstack([tr.cum_regret for tr in members])
        mean = values.mean(axis=0)
        std = values.std(axis=0, ddof=1) if len(members) > 1 else np.zeros_like(mean)
        rows.extend(SummaryRow(*key, int(t), float(m), float(s), len(members)) for t, m, s in zip(grid, mean, std))
    return rows


def write_summary_csv(rows, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for r in rows:
        w.writerow((r.env, r.algo, fmt_float(r.epsilon), fmt_float(r.delta), r.t, fmt_float(r.mean),
                    fmt_float(r.std), r.count, fmt_float(r.lower), fmt_float(r.upper)))
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")


def growth_metric(trace: RegretTrace, T: int) -> float:
    """``Reg(T) / Reg(T/2)``: about 1.41 for sqrt-T growth, 2 for linear, near 1 for log."""
    if T % 2:
        raise ValueError("T must be even so that T/2 is a round")
    try:
        full, half = trace.regret_at(T), trace.regret_at(T // 2)
    except KeyError as exc:
        raise ValueError(str(exc)) from None
    if half == 0:
        return 1.0 if full == 0 else math.inf
    return full / half
