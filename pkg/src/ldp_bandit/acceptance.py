"""Acceptance checks, one function per criterion, shared by the test-suite and ``check``.

Each check returns a ``CheckResult``; nothing here asserts, so a failing
criterion still reports its measured numbers.
"""

from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .envs import make_preset
from .estimators import (
    LinkFunction,
    OlsState,
    SgdState,
    make_ols_observation,
    make_sgd_observation,
    ols_ingest,
    ols_point_estimate,
    sgd_step,
)
from .multi import MultiAlgoConfig, run_multi, synthetic_observations
from .privacy import BallMechanismParams, PrivacyBudget, gaussian_sigma, l2_ball_privatize_batch
from .runner import growth_metric, replication_seed, run_experiment
from .single import SingleAlgoConfig, run_single

SEEDS = 10
HORIZON = 100_000


@dataclass
class CheckResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number:>2} {self.title}: {self.detail} ({self.seconds:.1f}s)"


def _timed(number: int, title: str):
    def wrap(fn):
        def run() -> CheckResult:
            start = time.perf_counter()
            passed, detail = fn()
            return CheckResult(number, title, bool(passed), detail, time.perf_counter() - start)

        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run

    return wrap


def _seeds(n: int = SEEDS) -> list[int]:
    return [replication_seed(0, rep) for rep in range(n)]


# --------------------------------------------------------------------------- 1


@_timed(1, "ball mechanism identities")
def check_mechanism() -> tuple[bool, str]:
    """Norm, unbiasedness and branch frequency over d x eps x |x| grid (N = 2e5 each)."""
    start = time.perf_counter()
    N, R = 200_000, 1.0
    rng_x = np.random.default_rng(11)
    worst_norm, worst_mean, worst_branch = 0.0, 0.0, 0.0
    for d in (2, 5, 20):
        direction = rng_x.standard_normal(d)
        direction /= np.linalg.norm(direction)
        for eps in (0.5, 1.0, 5.0):
            params = BallMechanismParams.create(eps, d, R)
            for scale in (0.0, 0.5, 1.0):
                x = scale * R * direction
                seed = 1000 * d + int(10 * eps) + int(10 * scale)
                z = l2_ball_privatize_batch(x, params, np.random.default_rng(seed), N)
                norms = np.sqrt(np.einsum("ij,ij->i", z, z))
                worst_norm = max(worst_norm, float(np.max(np.abs(norms / params.radius - 1.0))))
                tol = 5.0 * params.radius / math.sqrt(N)
                worst_mean = max(worst_mean, float(np.max(np.abs(z.mean(axis=0) - x))) / tol)
                if scale > 0:
                    # replay the coin draws (they come first) to recover the sign-flipped input
                    coins = np.random.default_rng(seed).random((N, 2))
                    sign = np.where(coins[:, 0] < 0.5 + scale / 2.0, 1.0, -1.0)
                    freq = float(np.mean((z @ x) * sign > 0))
                    worst_branch = max(worst_branch, abs(freq - params.p_aligned))
    elapsed = time.perf_counter() - start
    ok = worst_norm <= 1e-9 and worst_mean <= 1.0 and worst_branch <= 0.01 and elapsed < 30
    return ok, (
        f"max norm rel err {worst_norm:.2e} (<=1e-9), max |mean-x|/tol {worst_mean:.3f} (<=1), "
        f"max branch dev {worst_branch:.4f} (<=0.01), {elapsed:.1f}s (<30s)"
    )


# --------------------------------------------------------------------------- 2


@_timed(2, "Gaussian noise calibration")
def check_calibration() -> tuple[bool, str]:
    import mpmath

    mpmath.mp.dps = 50
    cases = [
        (eps, delta, sens)
        for eps, sens in ((0.1, 1.0), (0.5, 2.0), (1.0, 2.0), (2.5, 0.5), (5.0, 3.0))
        for delta in (1e-6, 1e-3, 0.05, 0.1)
    ]
    worst = 0.0
    for eps, delta, sens in cases:
        exact = mpmath.mpf(sens) * mpmath.sqrt(2 * mpmath.log(mpmath.mpf(1.25) / mpmath.mpf(delta))) / mpmath.mpf(eps)
        got = gaussian_sigma(PrivacyBudget(eps, delta), sens)
        worst = max(worst, float(abs((got - exact) / exact)))
    return worst <= 1e-12, f"{len(cases)} cases, max rel err {worst:.2e} (<=1e-12)"


# --------------------------------------------------------------------------- 3


@_timed(3, "noiseless oracle equivalence")
def check_oracle() -> tuple[bool, str]:
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    d, n = 5, 500
    X = rng.standard_normal((n, d))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    theta = rng.standard_normal(d)
    theta /= 2 * np.linalg.norm(theta)
    y = X @ theta + 0.05 * rng.standard_normal(n)
    state = OlsState.empty(d, c_tilde=0.0)
    for x, r in zip(X, y):
        ols_ingest(state, make_ols_observation(x, r, 0.0, 1.0, 1.0, rng))
    got = ols_point_estimate(state)
    ref = np.linalg.solve(X.T @ X, X.T @ y)
    ols_err = float(np.linalg.norm(got - ref) / np.linalg.norm(ref))

    # SGD with eta_t = 1/t on x = e1, r = 1 reduces to theta <- theta - eta (theta - 1)
    e1 = np.zeros(3)
    e1[0] = 1.0
    sgd = SgdState.empty(3, c0=1.0)
    hand = 0.0
    exact = True
    for t in range(1, 101):
        z = make_sgd_observation(e1, 1.0, sgd.theta_hat, LinkFunction("identity"), None, 1.0, 1.0, rng, noiseless=True)
        sgd_step(sgd, z, 1.0 / t)
        hand = hand - (1.0 / t) * (hand - 1.0)
        exact &= sgd.theta_hat[0] == hand and not sgd.theta_hat[1:].any()
    elapsed = time.perf_counter() - start
    ok = ols_err <= 1e-9 and exact and elapsed < 5
    return ok, f"OLS rel err {ols_err:.2e} (<=1e-9), SGD recursion exact={exact}, {elapsed:.2f}s (<5s)"


# --------------------------------------------------------------------------- 4


def _surrogate(kind: str, s: float, r: float) -> float:
    if kind == "identity":
        return 0.5 * s * s - r * s
    return math.log1p(math.exp(s)) - r * s if s < 30 else s + math.log1p(math.exp(-s)) - r * s


@_timed(4, "GLM gradient vs finite differences")
def check_gradient() -> tuple[bool, str]:
    start = time.perf_counter()
    rng = np.random.default_rng(4)
    d, h = 5, 1e-5
    worst = 0.0
    for kind in ("identity", "logistic"):
        link = LinkFunction(kind)
        for _ in range(10):
            x = rng.standard_normal(d)
            x *= rng.uniform(0.2, 1.0) / np.linalg.norm(x)
            theta = rng.standard_normal(d)
            theta *= rng.uniform(0.2, 1.0) / np.linalg.norm(theta)
            r = float(rng.uniform(-1, 1)) if kind == "identity" else float(rng.integers(0, 2))
            g = make_sgd_observation(x, r, theta, link, None, 1.0, 1.0, rng, noiseless=True)
            fd = np.empty(d)
            for j in range(d):
                step = np.zeros(d)
                step[j] = h
                fd[j] = (_surrogate(kind, x @ (theta + step), r) - _surrogate(kind, x @ (theta - step), r)) / (2 * h)
            worst = max(worst, float(np.linalg.norm(g - fd) / np.linalg.norm(g)))
    elapsed = time.perf_counter() - start
    return worst <= 1e-6 and elapsed < 1, f"20 points, max rel err {worst:.2e} (<=1e-6), {elapsed:.2f}s (<1s)"


# --------------------------------------------------------------------------- 5, 6


@dataclass(frozen=True)
class RunSummary:
    growth: float
    total: float
    seconds: float


@lru_cache(maxsize=None)
def single_run(kind: str, epsilon: float | None, seed: int, T: int = HORIZON) -> RunSummary:
    """One single-parameter run on the default sphere preset; ``epsilon=None`` is noiseless."""
    env = make_preset("single_sphere")
    budget = PrivacyBudget(1.0 if epsilon is None else epsilon, 0.1 if kind == "private_ols" else 0.0)
    cfg = SingleAlgoConfig(kind, budget, T, noiseless=epsilon is None)
    start = time.perf_counter()
    trace = run_single(cfg, env, seed)
    return RunSummary(growth_metric(trace, T), trace.total_regret, time.perf_counter() - start)


def uniform_policy_regret(env_name: str = "single_sphere", n: int = 200_000, seed: int = 5) -> float:
    """Expected per-round regret of picking an arm uniformly at random (Monte Carlo)."""
    env = make_preset(env_name)
    rng = np.random.default_rng(seed)
    total = 0.0
    for _ in range(n // 1000):
        X = rng.standard_normal((1000, env.K, env.d))
        X /= np.linalg.norm(X, axis=2, keepdims=True)
        v = X @ env.theta_star
        total += float(np.sum(v.max(axis=1) - v.mean(axis=1)))
    return total / (n // 1000 * 1000)


@_timed(5, "single-parameter sqrt-T growth")
def check_single_growth() -> tuple[bool, str]:
    start = time.perf_counter()
    baseline = uniform_policy_regret()
    parts, ok = [], True
    for kind in ("private_ols", "private_sgd"):
        runs = [single_run(kind, 5.0, s) for s in _seeds()]
        g = float(np.mean([r.growth for r in runs]))
        per_round = float(np.mean([r.total for r in runs])) / HORIZON
        ratio = per_round / baseline
        ok &= 1.2 <= g <= 1.7 and ratio < 0.1
        parts.append(f"{kind.split('_')[1]}: growth {g:.3f} (in [1.2,1.7]), regret/T {per_round:.4f} = {ratio:.3f}x uniform (<0.1)")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 600
    return ok, "; ".join(parts) + f"; uniform {baseline:.4f}/round"


@_timed(6, "privacy-cost ordering")
def check_ordering() -> tuple[bool, str]:
    levels = [(1.0, "eps=1"), (5.0, "eps=5"), (None, "noiseless")]
    stats = []
    for eps, _ in levels:
        totals = np.array([single_run("private_ols", eps, s).total for s in _seeds()])
        stats.append((totals.mean(), totals.std(ddof=1)))
    ok, parts = True, []
    for (m1, s1), (m2, s2), (_, a), (_, b) in zip(stats, stats[1:], levels, levels[1:]):
        pooled = math.sqrt((s1**2 + s2**2) / 2)
        gap = m1 - m2
        ok &= gap >= -pooled
        parts.append(f"{a}-{b} gap {gap:.1f} (>= -{pooled:.1f})")
    means = ", ".join(f"{name} {m:.1f}" for (m, _), (_, name) in zip(stats, levels))
    return ok, f"means {means}; " + "; ".join(parts)


# --------------------------------------------------------------------------- 7


@lru_cache(maxsize=None)
def multi_separated_run(seed: int, s0: int | None = None, T: int = HORIZON):
    env = make_preset("multi_separated")
    cfg = MultiAlgoConfig("private_ols", PrivacyBudget(5.0, 0.1), T, s0=s0)
    trace = run_multi(cfg, env, seed)
    warm = trace.info["warmup_rounds"]
    sub_plays = int(np.isin(trace.chosen[warm:], env.suboptimal_arms).sum())
    return growth_metric(trace, T), sub_plays, trace.info["s0"]


@_timed(7, "multi-parameter margin flattening")
def check_multi_flattening() -> tuple[bool, str]:
    runs = [multi_separated_run(s) for s in _seeds()]
    g = float(np.mean([r[0] for r in runs]))
    clean = sum(r[1] == 0 for r in runs)
    ok = g < 1.35 and clean >= 9
    plays = [r[1] for r in runs]
    return ok, f"s0={runs[0][2]}, mean growth {g:.3f} (<1.35), seeds without sub-optimal plays {clean}/10 (>=9), plays {plays}"


# --------------------------------------------------------------------------- 8


@_timed(8, "synthetic-update opacity")
def check_opacity() -> tuple[bool, str]:
    from scipy.stats import ks_2samp

    env = make_preset("multi_separated")
    d, K, n = env.d, env.K, 10_000
    parts, ok = [], True
    for kind in ("private_ols", "private_sgd"):
        cfg = MultiAlgoConfig(kind, PrivacyBudget(1.0, 0.1 if kind == "private_ols" else 0.0), 1000)
        from .multi import init_multi, make_builder

        builder = make_builder(init_multi(cfg, env), env)
        theta = np.full((K, d), 0.1)
        X_a, X_b = np.eye(d)[0], -np.eye(d)[1]

        def first_coord(obs):
            return float(obs.M[0, 1]) if hasattr(obs, "M") else float(obs[0])

        # independent streams: arm 2 unselected in both scenarios, different (X, r, chosen)
        ga, gb = np.random.default_rng(81), np.random.default_rng(82)
        sa, sb = [], []
        for _ in range(n):
            sa.append(first_coord(synthetic_observations(X_a, 0.9, 0, K, theta, builder, [ga] * K)[2]))
            sb.append(first_coord(synthetic_observations(X_b, -0.4, 1, K, theta, builder, [gb] * K)[2]))
        p = ks_2samp(sa, sb).pvalue
        # identical substreams: the unselected arm's message is bitwise the same
        same = True
        for seed in range(50):
            oa = synthetic_observations(X_a, 0.9, 0, K, theta, builder, [np.random.default_rng([seed, i]) for i in range(K)])
            ob = synthetic_observations(X_b, -0.4, 1, K, theta, builder, [np.random.default_rng([seed, i]) for i in range(K)])
            same &= first_coord(oa[2]) == first_coord(ob[2])
        ok &= p > 0.01 and same
        parts.append(f"{kind.split('_')[1]}: KS p={p:.3f} (>0.01), bitwise equal on shared streams={same}")
    return ok, "; ".join(parts)


# --------------------------------------------------------------------------- 9


DETERMINISM_CONFIGS = {
    "single": """
[experiment]
T = 2000
replications = 3
base_seed = 7
log_stride = 50
[env]
preset = single_sphere
[algo.ols]
kind = single_ols
epsilon = 1
[algo.sgd]
kind = single_sgd
epsilon = 1
""",
    "multi": """
[experiment]
T = 1500
replications = 2
base_seed = 9
log_stride = 50
[env]
preset = multi_separated
[algo.mols]
kind = multi_ols
epsilon = 5
s0 = 50
[algo.msgd]
kind = multi_sgd
epsilon = 5
s0 = 50
""",
}


@_timed(9, "determinism and parallel equivalence")
def check_determinism() -> tuple[bool, str]:
    from .config import parse_config

    ok, parts = True, []
    with tempfile.TemporaryDirectory() as tmp:
        for name, text in DETERMINISM_CONFIGS.items():
            cfg = parse_config(text)
            bodies = []
            for i, par in enumerate((1, 1, 8)):
                res = run_experiment(cfg, Path(tmp) / f"{name}{i}", parallelism=par)
                bodies.append(res.csv_path.read_bytes())
            same = all(b == bodies[0] for b in bodies) and not res.failures
            ok &= same
            parts.append(f"{name}: repeat and parallelism 1 vs 8 identical={same}")
    return ok, "; ".join(parts)


# --------------------------------------------------------------------------- 10


@_timed(10, "performance")
def check_performance() -> tuple[bool, str]:
    env = make_preset("single_sphere", d=10, K=10)
    start = time.perf_counter()
    run_single(SingleAlgoConfig("private_sgd", PrivacyBudget(1.0), HORIZON), env, 0)
    t_single = time.perf_counter() - start
    env = make_preset("multi_random", d=10, K=5)
    start = time.perf_counter()
    run_multi(MultiAlgoConfig("private_ols", PrivacyBudget(1.0, 0.1), HORIZON), env, 0)
    t_multi = time.perf_counter() - start
    ok = t_single < 10 and t_multi < 120
    return ok, f"single SGD d=10 K=10: {t_single:.1f}s (<10s); multi OLS d=10 K=5: {t_multi:.1f}s (<120s)"


CHECKS = {
    1: check_mechanism,
    2: check_calibration,
    3: check_oracle,
    4: check_gradient,
    5: check_single_growth,
    6: check_ordering,
    7: check_multi_flattening,
    8: check_opacity,
    9: check_determinism,
    10: check_performance,
}

SUITES = {
    "all": tuple(CHECKS),
    "fast": (1, 2, 3, 4, 8, 9),
    "regret": (5, 6, 7),
    "perf": (10,),
}


def run_suite(name: str = "all", echo=print) -> list[CheckResult]:
    if name in SUITES:
        numbers = SUITES[name]
    else:
        try:
            numbers = tuple(int(n) for n in name.split(","))
        except ValueError:
            raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)} or a list like '1,3'") from None
        if any(n not in CHECKS for n in numbers):
            raise ValueError(f"criteria are numbered 1-{len(CHECKS)}")
    results = []
    for n in numbers:
        res = CHECKS[n]()
        if echo:
            echo(res.line())
        results.append(res)
    return results
