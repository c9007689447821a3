"""Synthetic ground-truth environments and named presets.

Arm indices are 0-based everywhere in this package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .estimators import LinkFunction

CONTEXT_LAWS = ("unit_sphere_uniform", "gaussian_isotropic", "intercept_sphere", "pricing_grid", "custom")
NOISE_KINDS = ("truncated_gaussian", "bernoulli")
TRUNCATION = 3.0
# Weight of the constant coordinate in the ``intercept_sphere`` law.
INTERCEPT = 1.0 / math.sqrt(2.0)


@dataclass
class EnvSpec:
    mode: str
    d: int
    K: int
    theta_star: np.ndarray
    link: LinkFunction = field(default_factory=LinkFunction)
    context_law: str = "unit_sphere_uniform"
    noise_kind: str = "truncated_gaussian"
    noise_sigma: float = 0.1
    C_B: float = 1.0
    c_r: float | None = None
    name: str = "custom"
    # known sub-optimality gap and the arms it applies to (multi presets only)
    h_sub: float | None = None
    suboptimal_arms: tuple[int, ...] = ()
    # pricing: arm prices, their normalizer, the customer pool and regret metric
    prices: np.ndarray | None = None
    price_scale: float = 1.0
    features: np.ndarray | None = None
    regret_metric: str = "acceptance"
    sampler: Callable[[np.random.Generator], np.ndarray] | None = None

    def __post_init__(self):
        if self.mode not in ("single_param", "multi_param"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.context_law not in CONTEXT_LAWS:
            raise ValueError(f"unknown context law {self.context_law!r}")
        if self.noise_kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.noise_kind!r}")
        if self.regret_metric not in ("acceptance", "revenue"):
            raise ValueError(f"unknown regret metric {self.regret_metric!r}")
        self.theta_star = np.asarray(self.theta_star, dtype=float)
        expected = (self.d,) if self.mode == "single_param" else (self.K, self.d)
        if self.theta_star.shape != expected:
            raise ValueError(f"theta_star has shape {self.theta_star.shape}, expected {expected}")
        norms = np.linalg.norm(np.atleast_2d(self.theta_star), axis=1)
        if np.any(norms > 1 + 1e-12):
            raise ValueError("every arm parameter must have norm at most 1")
        if self.link.C_B != self.C_B:
            self.link = LinkFunction(self.link.kind, self.C_B)
        if self.c_r is None:
            if self.noise_kind == "bernoulli":
                self.c_r = 1.0
            else:
                self.c_r = self.C_B + TRUNCATION * self.noise_sigma
        if self.context_law == "custom" and self.sampler is None:
            raise ValueError("context_law='custom' needs a sampler")
        if self.context_law == "pricing_grid" and (self.prices is None or self.features is None):
            raise ValueError("pricing_grid contexts need prices and a feature pool")

    def arm_theta(self, arm: int) -> np.ndarray:
        return self.theta_star if self.mode == "single_param" else self.theta_star[arm]


@dataclass(frozen=True)
class RoundSample:
    """Contexts of one round: ``(K, d)`` in single mode, ``(1, d)`` (shared) in multi mode."""

    contexts: np.ndarray
    values: np.ndarray
    optimal_arm: int
    optimal_value: float

    def arm_context(self, arm: int) -> np.ndarray:
        return self.contexts[arm] if self.contexts.shape[0] > 1 else self.contexts[0]


def _unit_sphere(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    g = rng.standard_normal((n, d))
    return g / np.sqrt(np.einsum("ij,ij->i", g, g))[:, None]


def _draw_contexts(env: EnvSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    law = env.context_law
    if law == "unit_sphere_uniform":
        return env.C_B * _unit_sphere(rng, n, env.d)
    if law == "gaussian_isotropic":
        g = rng.standard_normal((n, env.d)) * (env.C_B / math.sqrt(env.d))
        norms = np.linalg.norm(g, axis=1, keepdims=True)
        return np.where(norms > env.C_B, g * (env.C_B / np.maximum(norms, 1e-300)), g)
    if law == "intercept_sphere":
        x = np.empty((n, env.d))
        x[:, 0] = INTERCEPT
        x[:, 1:] = math.sqrt(1.0 - INTERCEPT**2) * _unit_sphere(rng, n, env.d - 1)
        return env.C_B * x
    if law == "pricing_grid":
        row = env.features[rng.integers(env.features.shape[0])]
        p = env.prices / env.price_scale
        return np.concatenate([np.tile(row, (p.size, 1)), p[:, None] * row[None, :]], axis=1)
    contexts = np.atleast_2d(np.asarray(env.sampler(rng), dtype=float))
    return contexts


def arm_values(env: EnvSpec, contexts: np.ndarray) -> np.ndarray:
    if env.mode == "single_param":
        scores = contexts @ env.theta_star
    else:
        scores = env.theta_star @ contexts[0]
    values = env.link.eval(scores)
    if env.regret_metric == "revenue" and env.prices is not None:
        values = values * (env.prices / env.price_scale)
    return np.asarray(values, dtype=float)


def draw_round(env: EnvSpec, rng: np.random.Generator) -> RoundSample:
    """Draw this round's contexts and the ground-truth optimal arm (lowest index on ties)."""
    n = env.K if env.mode == "single_param" else 1
    contexts = _draw_contexts(env, n, rng)
    values = arm_values(env, contexts)
    best = int(values.argmax())
    return RoundSample(contexts=contexts, values=values, optimal_arm=best, optimal_value=float(values[best]))


def _truncated_normal(rng: np.random.Generator) -> float:
    while True:
        z = rng.standard_normal()
        if abs(z) <= TRUNCATION:
            return z


def realize_reward(env: EnvSpec, context, arm: int, rng: np.random.Generator) -> float:
    """Noisy reward of ``arm`` at its ``context``, always within ``[-c_r, c_r]``."""
    if not 0 <= arm < env.K:
        raise ValueError(f"arm {arm} out of range for K={env.K}")
    mean = float(env.link.eval(float(np.asarray(context) @ env.arm_theta(arm))))
    if env.noise_kind == "bernoulli":
        return 1.0 if rng.random() < mean else 0.0
    r = mean
    if env.noise_sigma > 0:
        r += env.noise_sigma * _truncated_normal(rng)
    return min(max(r, -env.c_r), env.c_r)


def instant_regret(env: EnvSpec, sample: RoundSample, chosen: int) -> float:
    if not 0 <= chosen < env.K:
        raise ValueError(f"arm {chosen} out of range for K={env.K}")
    return max(0.0, sample.optimal_value - float(sample.values[chosen]))


# --------------------------------------------------------------------------- presets


def _random_unit(rng: np.random.Generator, d: int) -> np.ndarray:
    return _unit_sphere(rng, 1, d)[0]


def single_sphere(d: int = 5, K: int = 10, noise_sigma: float = 0.1, theta_seed: int = 0, link: str = "identity") -> EnvSpec:
    """Single-parameter linear (or logistic) bandit with contexts uniform on the unit sphere."""
    theta = _random_unit(np.random.default_rng(theta_seed), d)
    noise_kind = "bernoulli" if link == "logistic" else "truncated_gaussian"
    return EnvSpec(
        mode="single_param", d=d, K=K, theta_star=theta, link=LinkFunction(link),
        context_law="unit_sphere_uniform", noise_kind=noise_kind, noise_sigma=noise_sigma,
        name=f"single_sphere_{link}",
    )


def multi_separated(d: int = 5, noise_sigma: float = 0.1) -> EnvSpec:
    """Three arms; arm 2 trails the better of arms 0 and 1 by at least ``h_sub`` everywhere.

    Contexts carry a constant first coordinate (``intercept_sphere``): on the
    plain sphere no arm can be sub-optimal for every context. Arms 0 and 1 swap
    optimality across ``x[1] = 0``, which gives a margin exponent of one.
    """
    if d < 3:
        raise ValueError("the separated preset needs d >= 3")
    theta = np.zeros((3, d))
    theta[0, :2] = (0.3, 0.8)
    theta[1, :2] = (0.3, -0.8)
    theta[2, 0] = -0.6
    h_sub = INTERCEPT * (theta[0, 0] - theta[2, 0])
    return EnvSpec(
        mode="multi_param", d=d, K=3, theta_star=theta, context_law="intercept_sphere",
        noise_sigma=noise_sigma, name="multi_separated", h_sub=h_sub, suboptimal_arms=(2,),
    )


def multi_random(d: int = 5, K: int = 5, noise_sigma: float = 0.1, theta_seed: int = 0) -> EnvSpec:
    """K arms with random unit-norm parameters and unit-sphere contexts (no guaranteed gap)."""
    rng = np.random.default_rng(theta_seed)
    theta = _unit_sphere(rng, K, d)
    return EnvSpec(mode="multi_param", d=d, K=K, theta_star=theta, noise_sigma=noise_sigma, name="multi_random")


def make_pricing_env(
    theta_star,
    price_grid,
    feature_dim: int,
    features=None,
    regret_metric: str = "acceptance",
    price_scale: float | None = None,
    rng: np.random.Generator | None = None,
) -> EnvSpec:
    """Logit-demand pricing bandit: arm ``i`` offers price ``p_i``; context is ``(x, p_i x)``.

    Prices are divided by ``price_scale`` (default: the top of the grid) before
    entering the context, so ``theta_star`` lives on the normalized scale.
    Customer features are rescaled to norm at most ``1/sqrt(2)`` which keeps
    every arm context inside the unit ball.
    """
    prices = np.asarray(price_grid, dtype=float)
    if prices.ndim != 1 or prices.size < 2:
        raise ValueError("price grid must be a 1-d array with at least two prices")
    if np.any(np.diff(prices) <= 0):
        raise ValueError("price grid must be strictly increasing")
    if prices[0] < 0 or prices[-1] > 25000:
        raise ValueError("prices must lie in the feasible region [0, 25000]")
    if price_scale is None:
        price_scale = float(prices[-1]) if prices[-1] > 0 else 1.0
    if features is None:
        rng = rng or np.random.default_rng(0)
        features = _unit_sphere(rng, 1000, feature_dim)
    features = np.asarray(features, dtype=float)
    if features.ndim != 2 or features.shape[1] != feature_dim:
        raise ValueError(f"features must have shape (n, {feature_dim})")
    max_norm = float(np.max(np.linalg.norm(features, axis=1)))
    if max_norm > 0:
        features = features * (INTERCEPT / max_norm)
    return EnvSpec(
        mode="single_param", d=2 * feature_dim, K=prices.size, theta_star=theta_star,
        link=LinkFunction("logistic"), context_law="pricing_grid", noise_kind="bernoulli",
        name="pricing", prices=prices, price_scale=float(price_scale), features=features,
        regret_metric=regret_metric,
    )


def uniform_price_grid(n: int = 25, low: float = 0.0, high: float = 25000.0) -> np.ndarray:
    return np.linspace(low, high, n)


PRESETS: dict[str, Callable[..., EnvSpec]] = {
    "single_sphere": single_sphere,
    "single_logistic": lambda **kw: single_sphere(link="logistic", **kw),
    "multi_separated": multi_separated,
    "multi_random": multi_random,
}


def make_preset(name: str, **overrides) -> EnvSpec:
    from . import pricing  # noqa: F401  (registers the pricing preset)

    try:
        factory = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown environment preset {name!r}; choose from {sorted(PRESETS)}") from None
    env = factory(**overrides)
    env.name = name
    return env


def with_sampler(env: EnvSpec, sampler: Callable[[np.random.Generator], np.ndarray]) -> EnvSpec:
    """Copy of ``env`` drawing contexts from ``sampler`` (fixtures and tests)."""
    return replace(env, context_law="custom", sampler=sampler)
