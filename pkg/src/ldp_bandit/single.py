"""Greedy single-parameter LDP contextual bandit with private OLS or private SGD.

Each round: the user receives the current estimate, picks the context segment
with the highest linear score, observes a reward, and sends one privatized
message. The server folds that message (and nothing else) into its estimate.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

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
from .privacy import BallMechanismParams, PrivacyBudget, gaussian_sigma
from .records import RegretTrace, RoundRecord, Streams

log = logging.getLogger(__name__)

ESTIMATORS = ("private_ols", "private_sgd")


@dataclass(frozen=True)
class SingleAlgoConfig:
    estimator_kind: str
    budget: PrivacyBudget
    T: int
    c_tilde_override: float | None = None
    sgd_c0: float | None = None  # None -> d
    alpha: float = 0.05
    noiseless: bool = False
    project_unit_ball: bool = True

    def __post_init__(self):
        if self.estimator_kind not in ESTIMATORS:
            raise ValueError(f"estimator_kind must be one of {ESTIMATORS}")
        if self.T < 0:
            raise ValueError("horizon T must be nonnegative")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.estimator_kind == "private_ols" and not self.noiseless and self.budget.delta <= 0:
            raise ValueError("Gaussian mechanism requires delta>0 (private_ols)")
        if self.sgd_c0 is not None and not self.sgd_c0 > 0:
            raise ValueError("sgd_c0 must be positive")


def ols_sigma(budget: PrivacyBudget) -> float:
    """Base noise scale ``2 sqrt(2 ln(1.25/delta)) / epsilon`` of the OLS mechanism."""
    return gaussian_sigma(budget, 2.0)


def select_arm_greedy(theta_hat, contexts, link=None) -> int:
    """Index of the largest linear score ``x_a^T theta_hat``; ties go to the lowest index.

    For a monotone link this is also the argmax of ``link.eval`` of the scores.
    """
    return int((np.asarray(contexts) @ theta_hat).argmax())


@dataclass
class SingleState:
    config: SingleAlgoConfig
    estimator: OlsState | SgdState
    theta_hat: np.ndarray
    sigma: float = 0.0
    ball: BallMechanismParams | None = None
    t: int = 0
    cum_regret: float = 0.0
    failed_solves: int = 0


def init_single(config: SingleAlgoConfig, env: EnvSpec) -> SingleState:
    d = env.d
    if config.estimator_kind == "private_ols":
        sigma = 0.0 if config.noiseless else ols_sigma(config.budget)
        if config.c_tilde_override is not None:
            c_tilde = config.c_tilde_override
        else:
            c_tilde = default_c_tilde(sigma, d, max(config.T, 1), config.alpha)
        return SingleState(config, OlsState.empty(d, c_tilde), np.zeros(d), sigma=sigma)
    ball = None if config.noiseless else BallMechanismParams.create(config.budget.epsilon, d, 2.0 * env.c_r * env.C_B)
    est = SgdState.empty(d, config.sgd_c0, config.project_unit_ball)
    return SingleState(config, est, np.zeros(d), ball=ball)


def user_message(state: SingleState, env: EnvSpec, x: np.ndarray, r: float, rng: np.random.Generator):
    """User side: privatize ``(x, r)`` given the broadcast estimate."""
    if isinstance(state.estimator, OlsState):
        return make_ols_observation(x, r, state.sigma, env.C_B, env.c_r, rng)
    return make_sgd_observation(
        x, r, state.theta_hat, env.link, state.config.budget.epsilon, env.C_B, env.c_r, rng,
        noiseless=state.config.noiseless, params=state.ball,
    )


def server_update(state: SingleState, obs) -> None:
    """Server side: consume one privatized message and refresh ``theta_hat``."""
    est = state.estimator
    if isinstance(est, OlsState):
        ols_ingest(est, obs)
        try:
            state.theta_hat = ols_point_estimate(est)
        except EstimatorError:
            state.failed_solves += 1
            log.warning("OLS solve failed at t=%d; keeping previous estimate", est.t)
    else:
        sgd_step(est, obs, est.c0 / (est.step_count + 1))
        state.theta_hat = est.theta_hat.copy()


def single_round(state: SingleState, env: EnvSpec, streams: Streams) -> tuple[SingleState, RoundRecord]:
    if state.t >= state.config.T:
        raise ValueError("horizon exhausted")
    sample = draw_round(env, streams.context)
    arm = select_arm_greedy(state.theta_hat, sample.contexts, env.link)
    x = sample.arm_context(arm)
    r = realize_reward(env, x, arm, streams.reward)
    server_update(state, user_message(state, env, x, r, streams.mechanism))
    regret = instant_regret(env, sample, arm)
    state.t += 1
    state.cum_regret += regret
    diff = state.theta_hat - env.theta_star
    err = math.sqrt(float(diff @ diff))
    return state, RoundRecord(state.t, arm, regret, state.cum_regret, err)


def algo_label(config: SingleAlgoConfig) -> str:
    return "single_" + config.estimator_kind.split("_")[1]


def run_single(config: SingleAlgoConfig, env: EnvSpec, seed: int, label: str | None = None) -> RegretTrace:
    """Run T rounds; the trace is a deterministic function of ``seed``."""
    if env.mode != "single_param":
        raise ValueError("run_single needs a single-parameter environment")
    streams = Streams.from_seed(seed)
    state = init_single(config, env)
    records = []
    for _ in range(config.T):
        state, rec = single_round(state, env, streams)
        records.append(rec)
    eps, delta = _reported_budget(config)
    trace = RegretTrace.from_records(
        records, algo=label or algo_label(config), epsilon=eps, delta=delta, seed=seed, env=env.name,
    )
    est = state.estimator
    trace.info.update(
        fallback_solves=getattr(est, "fallback_count", 0), failed_solves=state.failed_solves,
        c_tilde=getattr(est, "c_tilde", None),
    )
    return trace


def _reported_budget(config) -> tuple[float, float]:
    if config.noiseless:
        return math.inf, 0.0
    if config.estimator_kind == "private_sgd":
        return config.budget.epsilon, 0.0
    return config.budget.epsilon, config.budget.delta
