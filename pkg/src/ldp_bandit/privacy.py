"""Local randomizers: Gaussian mechanism, the l2-ball sphere mechanism, budgets.

Every function takes an explicit ``numpy.random.Generator``; nothing here keeps
global state, so a fixed seed reproduces outputs bitwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

# Inputs whose norm exceeds the ball radius by less than this relative slack
# are treated as floating-point noise and rescaled onto the ball.
NORM_SLACK = 1e-9


@dataclass(frozen=True)
class PrivacyBudget:
    """An (epsilon, delta) pair. ``delta == 0`` means pure epsilon-LDP."""

    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be positive and finite, got {self.epsilon}")
        if not (0.0 <= self.delta < 1.0):
            raise ValueError(f"delta must lie in [0, 1), got {self.delta}")

    def compose(self, other: "PrivacyBudget") -> "PrivacyBudget":
        """Basic composition: losses add in both coordinates."""
        return PrivacyBudget(self.epsilon + other.epsilon, self.delta + other.delta)

    __add__ = compose

    def scaled(self, factor: float) -> "PrivacyBudget":
        """Budget with both coordinates multiplied by ``factor`` (e.g. 0.5 for a split)."""
        return PrivacyBudget(self.epsilon * factor, self.delta * factor)


@dataclass(frozen=True)
class NoiseCalibration:
    sensitivity: float
    sigma: float

    @classmethod
    def for_budget(cls, budget: PrivacyBudget, sensitivity: float) -> "NoiseCalibration":
        return cls(sensitivity=sensitivity, sigma=gaussian_sigma(budget, sensitivity))


def gaussian_sigma(budget: PrivacyBudget, sensitivity: float) -> float:
    """Per-coordinate std of the Gaussian mechanism for an l2 ``sensitivity``.

    Raises ``ValueError`` when ``budget.delta == 0``: the Gaussian mechanism has
    no pure-epsilon guarantee, use the ball mechanism instead.
    """
    if budget.delta <= 0:
        raise ValueError("Gaussian mechanism requires delta > 0; use the l2-ball mechanism")
    if budget.epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if sensitivity < 0:
        raise ValueError("sensitivity must be nonnegative")
    if sensitivity == 0:
        return 0.0
    return sensitivity * math.sqrt(2.0 * math.log(1.25 / budget.delta)) / budget.epsilon


def perturb_vector(v, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Return ``v + N(0, sigma^2 I)``."""
    v = np.asarray(v, dtype=float)
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if not np.all(np.isfinite(v)):
        raise ValueError("input vector must be finite")
    if sigma == 0:
        return v.copy()
    return v + sigma * rng.standard_normal(v.shape)


@lru_cache(maxsize=64)
def _triu(d: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(d)


def symmetric_noise(d: int, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """A d x d matrix with iid N(0, sigma^2) upper triangle mirrored below."""
    rows, cols = _triu(d)
    w = np.empty((d, d))
    g = sigma * rng.standard_normal(rows.size)
    w[rows, cols] = g
    w[cols, rows] = g
    return w


def perturb_symmetric_matrix(M, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Return ``M + W`` with ``W`` symmetric Gaussian noise; output is bitwise symmetric."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("input matrix must be finite")
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if np.max(np.abs(M - M.T), initial=0.0) > 1e-12 * scale:
        raise ValueError("input matrix is not symmetric")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    # symmetrize first so the output is exactly symmetric even for tiny input asymmetry
    out = np.triu(M) + np.triu(M, 1).T
    if sigma == 0:
        return out
    return out + symmetric_noise(M.shape[0], sigma, rng)


@lru_cache(maxsize=256)
def ball_radius(epsilon: float, d: int, R: float) -> float:
    """Output sphere radius of the l2-ball mechanism for inputs of norm at most ``R``.

    ``(e^eps + 1)/(e^eps - 1)`` is evaluated as ``1/tanh(eps/2)`` and the Gamma
    ratio through ``lgamma`` so large ``eps`` or ``d`` do not overflow.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if int(d) != d or d < 1:
        raise ValueError("d must be a positive integer")
    if not R > 0:
        raise ValueError("R must be positive")
    gamma_ratio = math.exp(math.lgamma((d + 1) / 2.0) - math.lgamma(d / 2.0 + 1.0))
    return R * (math.sqrt(math.pi) / 2.0) / math.tanh(epsilon / 2.0) * d * gamma_ratio


@lru_cache(maxsize=256)
def _p_aligned(epsilon: float) -> float:
    return 1.0 / (1.0 + math.exp(-epsilon))


@dataclass(frozen=True)
class BallMechanismParams:
    epsilon: float
    R: float
    d: int
    radius: float

    @classmethod
    def create(cls, epsilon: float, d: int, R: float) -> "BallMechanismParams":
        return cls(epsilon=float(epsilon), R=float(R), d=int(d), radius=ball_radius(float(epsilon), int(d), float(R)))

    @property
    def p_aligned(self) -> float:
        """Probability of sampling from the halfspace aligned with the (sign-flipped) input."""
        return _p_aligned(self.epsilon)


def l2_ball_privatize_batch(x, params: BallMechanismParams, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` independent draws of the ball mechanism at a fixed input ``x``.

    Returns an array of shape ``(size, d)``. Each draw consumes, in order, one
    uniform for the sign coin, one uniform for the halfspace coin and ``d``
    standard normals for the direction.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (params.d,):
        raise ValueError(f"expected input of shape ({params.d},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input vector must be finite")
    norm = float(np.sqrt(x @ x))
    if norm > params.R * (1.0 + NORM_SLACK):
        raise ValueError(
            f"input norm {norm:.6g} exceeds ball radius R={params.R:.6g}; clip or rescale before privatizing"
        )
    if norm > params.R:
        x = x * (params.R / norm)
        norm = params.R

    coins = rng.random((size, 2))
    u = rng.standard_normal((size, params.d))
    u *= (params.radius / np.sqrt(np.einsum("ij,ij->i", u, u)))[:, None]
    if norm > 0:
        sign = np.where(coins[:, 0] < 0.5 + norm / (2.0 * params.R), 1.0, -1.0)
        aligned = coins[:, 1] < params.p_aligned
        # equator points (score == 0) belong to the "<= 0" halfspace
        positive = (u @ x) * sign > 0
        u[aligned != positive] *= -1.0
    # with x == 0 both branches are the full sphere, so u is returned as drawn
    return u


def l2_ball_privatize(x, params: BallMechanismParams, rng: np.random.Generator) -> np.ndarray:
    """One draw of the l2-ball mechanism: an unbiased point on the radius-r sphere.

    Consumes the generator exactly like ``l2_ball_privatize_batch(..., size=1)``
    and returns the same point up to rounding in the normalization.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (params.d,):
        raise ValueError(f"expected input of shape ({params.d},), got {x.shape}")
    norm = math.sqrt(float(x @ x))
    if not math.isfinite(norm):
        raise ValueError("input vector must be finite")
    if norm > params.R * (1.0 + NORM_SLACK):
        raise ValueError(
            f"input norm {norm:.6g} exceeds ball radius R={params.R:.6g}; clip or rescale before privatizing"
        )
    if norm > params.R:
        x = x * (params.R / norm)
        norm = params.R
    sign_coin, branch_coin = rng.random(2)
    u = rng.standard_normal(params.d)
    u *= params.radius / math.sqrt(float(u @ u))
    if norm > 0:
        score = float(u @ x)
        if sign_coin >= 0.5 + norm / (2.0 * params.R):
            score = -score
        if (branch_coin < params.p_aligned) != (score > 0):
            u = -u
    return u
