"""User-side observation builders and server-side estimators (private OLS, private SGD).

The user side turns a raw ``(x, r)`` pair into a privatized message; the
server side only ever sees those messages. Builders are pure functions of
their arguments plus an explicit rng.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .privacy import BallMechanismParams, l2_ball_privatize, symmetric_noise

log = logging.getLogger(__name__)

BOUND_SLACK = 1e-9


class EstimatorError(RuntimeError):
    """Raised when an estimate cannot be formed (no data, failed solve)."""


@dataclass(frozen=True)
class LinkFunction:
    """Monotone link ``mu`` with its derivative.

    ``C_B`` bounds the linear score range used for the curvature floor ``zeta``.
    """

    kind: str = "identity"
    C_B: float = 1.0

    def __post_init__(self):
        if self.kind not in ("identity", "logistic"):
            raise ValueError(f"unknown link kind {self.kind!r}")

    def eval(self, s):
        if self.kind == "identity":
            return s
        return _sigmoid(s)

    def deriv(self, s):
        if self.kind == "identity":
            return np.ones_like(np.asarray(s, dtype=float)) if np.ndim(s) else 1.0
        p = _sigmoid(s)
        return p * (1.0 - p)

    @property
    def lipschitz(self) -> float:
        return 1.0 if self.kind == "identity" else 0.25

    @property
    def zeta(self) -> float:
        """Smallest derivative over ``[-C_B, C_B]``."""
        return 1.0 if self.kind == "identity" else float(self.deriv(self.C_B))


def _sigmoid(s):
    if np.ndim(s) == 0:
        s = float(s)
        if s >= 0:
            return 1.0 / (1.0 + math.exp(-s))
        e = math.exp(s)
        return e / (1.0 + e)
    s = np.asarray(s, dtype=float)
    out = np.empty_like(s)
    pos = s >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    e = np.exp(s[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _check_bounds(x: np.ndarray, r: float, C_B: float, c_r: float) -> None:
    norm = math.sqrt(float(x @ x))
    if norm > C_B * (1 + BOUND_SLACK):
        raise ValueError(f"context norm {norm:.6g} exceeds C_B={C_B}")
    if abs(r) > c_r * (1 + BOUND_SLACK):
        raise ValueError(f"reward {r:.6g} exceeds c_r={c_r}; clip rewards in the environment")


# --------------------------------------------------------------------------- OLS


@dataclass(frozen=True)
class OlsObservation:
    M: np.ndarray
    u: np.ndarray


def make_ols_observation(x, r: float, sigma: float, C_B: float, c_r: float, rng: np.random.Generator) -> OlsObservation:
    """Privatize ``(x x^T, r x)`` with the Gaussian mechanism.

    ``sigma`` is the base scale (``sigma_{eps,delta}`` with the factor 2 already
    folded in); the matrix entries get std ``2 C_B sigma`` and the vector
    coordinates std ``C_B c_r sigma``. ``sigma == 0`` is the noiseless mode.
    """
    x = np.asarray(x, dtype=float)
    r = float(r)
    _check_bounds(x, r, C_B, c_r)
    M = np.outer(x, x)
    u = r * x
    if sigma > 0:
        M += symmetric_noise(x.size, 2.0 * C_B * sigma, rng)
        u = u + (C_B * c_r * sigma) * rng.standard_normal(x.size)
    return OlsObservation(M=M, u=u)


@dataclass
class OlsState:
    A: np.ndarray
    b: np.ndarray
    t: int = 0
    c_tilde: float = 0.0
    fallback_count: int = 0

    @classmethod
    def empty(cls, d: int, c_tilde: float = 0.0) -> "OlsState":
        return cls(A=np.zeros((d, d)), b=np.zeros(d), t=0, c_tilde=float(c_tilde))

    @property
    def d(self) -> int:
        return self.b.size


def ols_ingest(state: OlsState, obs: OlsObservation) -> OlsState:
    """Add one observation to the running sums (in place; returns ``state``)."""
    if obs.M.shape != state.A.shape or obs.u.shape != state.b.shape:
        raise ValueError(f"dimension mismatch: state d={state.d}, observation shapes {obs.M.shape}, {obs.u.shape}")
    state.A += obs.M
    state.b += obs.u
    state.t += 1
    return state


def ols_point_estimate(state: OlsState) -> np.ndarray:
    """Solve ``(A + c_tilde sqrt(t) I) theta = b``.

    A Cholesky solve is tried first; if the shifted matrix is not numerically
    positive definite, a ridge of ``1e-8 (1 + max|A|)`` is added once.
    """
    if state.t < 1:
        raise EstimatorError("no observations ingested")
    H = state.A + (state.c_tilde * math.sqrt(state.t)) * np.eye(state.d)
    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(H, check_finite=False), state.b, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    state.fallback_count += 1
    ridge = 1e-8 * (1.0 + float(np.max(np.abs(state.A))))
    log.debug("shifted Gram matrix not positive definite at t=%d; adding ridge %.3g", state.t, ridge)
    try:
        return scipy.linalg.cho_solve(
            scipy.linalg.cho_factor(H + ridge * np.eye(state.d), check_finite=False), state.b, check_finite=False
        )
    except np.linalg.LinAlgError as exc:
        raise EstimatorError(f"OLS solve failed at t={state.t} after fallback ridge") from exc


def default_c_tilde(sigma: float, d: int, T: int, alpha: float, K: int = 1) -> float:
    """Shift coefficient ``2 sigma (4 sqrt(d) + 2 log(2 T K / alpha))``.

    ``K = 1`` is the single-parameter choice; the multi-parameter algorithm
    passes its arm count and the half-budget ``sigma``.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if d < 1 or T < 1 or K < 1:
        raise ValueError("d, T and K must be positive")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    return 2.0 * sigma * (4.0 * math.sqrt(d) + 2.0 * math.log(2.0 * T * K / alpha))


# --------------------------------------------------------------------------- SGD


def make_sgd_observation(
    x,
    r: float,
    theta_hat,
    link: LinkFunction,
    epsilon: float | None,
    C_B: float,
    c_r: float,
    rng: np.random.Generator,
    noiseless: bool = False,
    params: BallMechanismParams | None = None,
) -> np.ndarray:
    """Privatized GLM gradient ``(mu(x^T theta_hat) - r) x`` through the l2-ball mechanism.

    The prediction ``mu(x^T theta_hat)`` is clipped to ``[-c_r, c_r]`` so the
    gradient norm never exceeds ``R = 2 c_r C_B`` even when the iterate has
    drifted outside the unit ball.
    """
    x = np.asarray(x, dtype=float)
    r = float(r)
    _check_bounds(x, r, C_B, c_r)
    pred = float(link.eval(float(x @ theta_hat)))
    pred = min(max(pred, -c_r), c_r)
    g = (pred - r) * x
    if noiseless:
        return g
    if params is None:
        params = BallMechanismParams.create(epsilon, x.size, 2.0 * c_r * C_B)
    return l2_ball_privatize(g, params, rng)


@dataclass
class SgdState:
    theta_hat: np.ndarray
    step_count: int = 0
    c0: float = 1.0
    project_unit_ball: bool = False

    @classmethod
    def empty(cls, d: int, c0: float | None = None, project_unit_ball: bool = False) -> "SgdState":
        return cls(theta_hat=np.zeros(d), step_count=0, c0=float(d if c0 is None else c0), project_unit_ball=project_unit_ball)


def sgd_step(state: SgdState, z, eta: float) -> SgdState:
    """``theta_hat <- theta_hat - eta z`` (in place), optionally projected on the unit ball."""
    if not eta > 0:
        raise ValueError(f"stepsize must be positive, got {eta}")
    z = np.asarray(z, dtype=float)
    if z.shape != state.theta_hat.shape:
        raise ValueError(f"dimension mismatch: {z.shape} vs {state.theta_hat.shape}")
    state.theta_hat -= eta * z
    if state.project_unit_ball:
        n = math.sqrt(float(state.theta_hat @ state.theta_hat))
        if n > 1.0:
            state.theta_hat /= n
    state.step_count += 1
    return state
