"""Multi-parameter LDP contextual bandit: warm-up, elimination, greedy play, synthetic updates.

During warm-up arms are played round-robin and only the played arm's estimator
is updated. Afterwards every arm receives a message every round: the played
arm's message is built from the real ``(X_t, r_t)``, every other arm's from the
zero pair, so the server cannot tell which arm was pulled. Arms whose frozen
warm-up score trails the best by more than ``h/2`` are excluded that round.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .envs import EnvSpec, draw_round, instant_regret, realize_reward
from .estimators import (
    EstimatorError,
    OlsState,
    SgdState,
    default_c_tilde,
    make_ols_observation,
    make_sgd_observation,
    ols_ingest,
    ols_point_estimate,
    sgd_step,
)
from .privacy import BallMechanismParams, PrivacyBudget
from .records import RegretTrace, RoundRecord, Streams
from .single import ESTIMATORS, ols_sigma

log = logging.getLogger(__name__)


def default_s0(K: int, d: int, T: int, alpha: float, epsilon: float) -> int:
    """Warm-up length per arm: ``ceil(25 K (d + ln(T K / alpha)) / eps^2)``, capped at ``T / (4K)``."""
    raw = math.ceil(25.0 * K * (d + math.log(T * K / alpha)) / epsilon**2)
    return max(1, min(raw, T // (4 * K)))


@dataclass(frozen=True)
class MultiAlgoConfig:
    estimator_kind: str
    budget: PrivacyBudget
    T: int
    s0: int | None = None
    h: float | None = None
    sgd_c0: float | None = None  # None -> d
    K_opt_guess: int | None = None  # None -> K
    alpha: float = 0.05
    noiseless: bool = False
    c_tilde_override: float | None = None
    warmup_stepsize: str = "per_arm"
    project_unit_ball: bool = True

    def __post_init__(self):
        if self.estimator_kind not in ESTIMATORS:
            raise ValueError(f"estimator_kind must be one of {ESTIMATORS}")
        if self.T < 0:
            raise ValueError("horizon T must be nonnegative")
        if self.s0 is not None and self.s0 < 1:
            raise ValueError("s0 must be a positive integer")
        if self.h is not None and not self.h > 0:
            raise ValueError("h must be positive")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.warmup_stepsize not in ("per_arm", "round_index"):
            raise ValueError("warmup_stepsize must be 'per_arm' or 'round_index'")
        if self.estimator_kind == "private_ols" and not self.noiseless and self.budget.delta <= 0:
            raise ValueError("Gaussian mechanism requires delta>0 (private_ols)")

    def resolve(self, env: EnvSpec) -> "ResolvedMulti":
        half = self.budget.scaled(0.5)
        s0 = self.s0 if self.s0 is not None else default_s0(env.K, env.d, max(self.T, 4 * env.K), self.alpha, half.epsilon * 2)
        if env.K * s0 > self.T:
            raise ValueError(f"warm-up K*s0={env.K * s0} exceeds the horizon T={self.T}")
        h = self.h if self.h is not None else (env.h_sub if env.h_sub is not None else math.inf)
        return ResolvedMulti(
            s0=s0, h=h, half=half,
            c0=float(env.d if self.sgd_c0 is None else self.sgd_c0),
            K_opt=int(env.K if self.K_opt_guess is None else self.K_opt_guess),
        )


@dataclass(frozen=True)
class ResolvedMulti:
    s0: int
    h: float
    half: PrivacyBudget
    c0: float
    K_opt: int


def warmup_arm(t: int, K: int) -> int:
    """Round-robin arm for warm-up round ``t`` (1-based round, 0-based arm)."""
    if t < 1:
        raise ValueError("rounds are numbered from 1")
    return t % K


def eliminate(context, snapshot, h: float) -> np.ndarray:
    """Arms whose warm-up score exceeds ``max score - h/2`` (sorted indices, never empty)."""
    scores = np.asarray(snapshot) @ np.asarray(context)
    keep = np.flatnonzero(scores > scores.max() - h / 2.0)
    if keep.size == 0:  # only reachable through inf/nan scores
        keep = np.array([int(np.argmax(scores))])
    return keep


def multi_sgd_stepsize(
    t: int, K: int, s0: int, K_opt_guess: int, c0: float, per_arm_update_count: int, warmup: str = "per_arm"
) -> float:
    """SGD stepsize for round ``t``.

    Warm-up: ``c0 / n`` with ``n`` the arm's own update count (``warmup='per_arm'``)
    or ``c0 / ((t mod K) + 1)`` (``warmup='round_index'``). Main phase:
    ``c0 K_opt / (t - (K - 1) s0)``.
    """
    if t < 1:
        raise ValueError("rounds are numbered from 1")
    if t <= K * s0:
        if warmup == "per_arm":
            return c0 / max(per_arm_update_count, 1)
        return c0 / ((t % K) + 1)
    return c0 * K_opt_guess / (t - (K - 1) * s0)


Builder = Callable[[np.ndarray, float, np.ndarray, np.random.Generator], object]


def synthetic_observations(X, r: float, chosen: int, K: int, theta_hats, builder: Builder, rngs) -> list:
    """One message per arm; unselected arms get ``builder(0, 0, ...)`` on their own stream."""
    if not 0 <= chosen < K:
        raise ValueError(f"chosen arm {chosen} out of range for K={K}")
    X = np.asarray(X, dtype=float)
    zero = np.zeros_like(X)
    return [
        builder(X, r, theta_hats[i], rngs[i]) if i == chosen else builder(zero, 0.0, theta_hats[i], rngs[i])
        for i in range(K)
    ]


@dataclass
class MultiServerState:
    config: MultiAlgoConfig
    params: ResolvedMulti
    arms: list
    theta_hat: np.ndarray
    sigma: float = 0.0
    ball: BallMechanismParams | None = None
    warmup_snapshot: np.ndarray | None = None
    snapshot_hash: str | None = None
    phase: str = "warmup"
    t: int = 0
    cum_regret: float = 0.0
    failed_solves: int = 0
    last_updated: tuple[int, ...] = ()

    @property
    def K(self) -> int:
        return len(self.arms)


def init_multi(config: MultiAlgoConfig, env: EnvSpec) -> MultiServerState:
    p = config.resolve(env)
    d, K = env.d, env.K
    if config.estimator_kind == "private_ols":
        sigma = 0.0 if config.noiseless else ols_sigma(p.half)
        if config.c_tilde_override is not None:
            c_tilde = config.c_tilde_override
        else:
            c_tilde = default_c_tilde(sigma, d, max(config.T, 1), config.alpha, K)
        arms = [OlsState.empty(d, c_tilde) for _ in range(K)]
        return MultiServerState(config, p, arms, np.zeros((K, d)), sigma=sigma)
    ball = None if config.noiseless else BallMechanismParams.create(p.half.epsilon, d, 2.0 * env.c_r * env.C_B)
    arms = [SgdState.empty(d, p.c0, config.project_unit_ball) for _ in range(K)]
    return MultiServerState(config, p, arms, np.zeros((K, d)), ball=ball)


def make_builder(state: MultiServerState, env: EnvSpec) -> Builder:
    """User-side message builder bound to the run's mechanism parameters."""
    if state.config.estimator_kind == "private_ols":
        sigma = state.sigma

        def build(x, r, theta_hat, rng):
            return make_ols_observation(x, r, sigma, env.C_B, env.c_r, rng)
    else:
        eps, ball, noiseless = state.params.half.epsilon, state.ball, state.config.noiseless

        def build(x, r, theta_hat, rng):
            return make_sgd_observation(x, r, theta_hat, env.link, eps, env.C_B, env.c_r, rng, noiseless=noiseless, params=ball)
    return build


def server_update(state: MultiServerState, arm: int, obs, t: int) -> None:
    """Fold one privatized message into ``arm``'s estimator."""
    est = state.arms[arm]
    if isinstance(est, OlsState):
        ols_ingest(est, obs)
        try:
            state.theta_hat[arm] = ols_point_estimate(est)
        except EstimatorError:
            state.failed_solves += 1
            log.warning("OLS solve failed for arm %d at t=%d; keeping previous estimate", arm, t)
    else:
        p = state.params
        eta = multi_sgd_stepsize(t, state.K, p.s0, p.K_opt, est.c0, est.step_count + 1, state.config.warmup_stepsize)
        sgd_step(est, obs, eta)
        state.theta_hat[arm] = est.theta_hat


def _freeze(state: MultiServerState) -> None:
    snap = state.theta_hat.copy()
    snap.flags.writeable = False
    state.warmup_snapshot = snap
    state.snapshot_hash = hashlib.sha256(snap.tobytes()).hexdigest()
    state.phase = "main"


def multi_round(state: MultiServerState, env: EnvSpec, streams: Streams, arm_rngs, builder: Builder):
    t = state.t + 1
    if t > state.config.T:
        raise ValueError("horizon exhausted")
    K, s0 = state.K, state.params.s0
    sample = draw_round(env, streams.context)
    X = sample.contexts[0]
    if t <= K * s0:
        arm = warmup_arm(t, K)
        r = realize_reward(env, X, arm, streams.reward)
        server_update(state, arm, builder(X, r, state.theta_hat[arm], arm_rngs[arm]), t)
        state.last_updated = (arm,)
        if t == K * s0:
            _freeze(state)
    else:
        if state.warmup_snapshot is None:
            _freeze(state)  # s0 covers no rounds only if K*s0 == 0, kept for safety
        candidates = eliminate(X, state.warmup_snapshot, state.params.h)
        # argmax of mu(X^T theta) equals argmax of the linear score for a monotone link
        arm = int(candidates[np.argmax(state.theta_hat[candidates] @ X)])
        r = realize_reward(env, X, arm, streams.reward)
        theta_prev = state.theta_hat.copy()
        for i, obs in enumerate(synthetic_observations(X, r, arm, K, theta_prev, builder, arm_rngs)):
            server_update(state, i, obs, t)
        state.last_updated = tuple(range(K))
    regret = instant_regret(env, sample, arm)
    state.t = t
    state.cum_regret += regret
    diff = state.theta_hat - env.theta_star
    err = math.sqrt(float(np.einsum("ij,ij->i", diff, diff).max()))
    return state, RoundRecord(t, arm, regret, state.cum_regret, err)


def run_multi(config: MultiAlgoConfig, env: EnvSpec, seed: int, label: str | None = None) -> RegretTrace:
    if env.mode != "multi_param":
        raise ValueError("run_multi needs a multi-parameter environment")
    streams = Streams.from_seed(seed)
    state = init_multi(config, env)
    arm_rngs = streams.arm_streams(env.K)
    builder = make_builder(state, env)
    records = []
    for _ in range(config.T):
        state, rec = multi_round(state, env, streams, arm_rngs, builder)
        records.append(rec)
    if state.warmup_snapshot is not None:
        if hashlib.sha256(state.warmup_snapshot.tobytes()).hexdigest() != state.snapshot_hash:
            raise RuntimeError("warm-up snapshot changed after freezing")
    if config.noiseless:
        eps, delta = math.inf, 0.0
    elif config.estimator_kind == "private_sgd":
        eps, delta = config.budget.epsilon, 0.0
    else:
        eps, delta = config.budget.epsilon, config.budget.delta
    trace = RegretTrace.from_records(
        records, algo=label or "multi_" + config.estimator_kind.split("_")[1],
        epsilon=eps, delta=delta, seed=seed, env=env.name,
    )
    trace.info.update(
        s0=state.params.s0, h=state.params.h, warmup_rounds=env.K * state.params.s0,
        failed_solves=state.failed_solves, snapshot_hash=state.snapshot_hash,
        fallback_solves=sum(getattr(a, "fallback_count", 0) for a in state.arms),
    )
    return trace
