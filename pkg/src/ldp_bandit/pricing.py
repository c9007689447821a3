"""Auto-loan pricing data: CSV loader, synthetic generator, and the pricing preset.

Expected CSV schema (header names are exact):

    Monthly Payment, Term, Rate, Loan Amount   required
    Apply                                      optional 0/1 acceptance label
    anything else                              numeric feature columns
                                               (one-hot columns pass through)

The imputed price of a row is the net present value of the payments minus
the loan amount, ``MP * sum_{k=1..Term} (1 + Rate)^-k - Loan Amount``.
``Term``, ``Loan Amount`` and every extra column are used as features;
``Monthly Payment``, ``Rate`` and ``Apply`` are not.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.optimize

from .envs import PRESETS, EnvSpec, make_pricing_env, uniform_price_grid

log = logging.getLogger(__name__)

REQUIRED = ("Monthly Payment", "Term", "Rate", "Loan Amount")
NON_FEATURES = ("Monthly Payment", "Rate", "Apply")
CAR_TYPES = ("new", "used", "refinance")


@dataclass
class PricingTable:
    feature_names: list[str]
    features: np.ndarray
    price: np.ndarray
    apply: np.ndarray | None
    dropped: int = 0


def npv_price(monthly_payment, term, rate, loan_amount):
    """Net present value of ``term`` payments at per-period ``rate`` minus the loan."""
    mp, term, rate, loan = (np.asarray(v, dtype=float) for v in (monthly_payment, term, rate, loan_amount))
    n = term.astype(int)
    if np.any(n != term) or np.any(n < 0):
        raise ValueError("Term must be a nonnegative integer")
    # annuity factor sum_{k=1..n} (1+r)^-k; the r == 0 limit is n
    safe = np.where(rate == 0, 1.0, rate)
    factor = np.where(rate == 0, n, (1.0 - (1.0 + safe) ** (-n)) / safe)
    return mp * factor - loan


def load_pricing_csv(path) -> PricingTable:
    """Read a pricing CSV, impute prices and drop rows with missing cells."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = list(reader)
    missing = [c for c in REQUIRED if c not in header]
    if missing:
        raise ValueError(f"{path}: missing required column(s) {missing}")
    if not rows:
        raise ValueError(f"{path}: no data rows")
    values = []
    dropped = 0
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header) or any(cell.strip() == "" for cell in row):
            dropped += 1
            continue
        try:
            values.append([float(cell) for cell in row])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: non-numeric cell ({exc})") from None
    if dropped:
        log.info("%s: dropped %d row(s) with missing values", path, dropped)
    if not values:
        raise ValueError(f"{path}: every row has missing values")
    data = np.array(values)
    col = {name: data[:, i] for i, name in enumerate(header)}
    price = npv_price(col["Monthly Payment"], col["Term"], col["Rate"], col["Loan Amount"])
    names = [h for h in header if h not in NON_FEATURES]
    return PricingTable(
        feature_names=names,
        features=np.column_stack([col[n] for n in names]),
        price=price,
        apply=col.get("Apply"),
        dropped=dropped,
    )


def _annuity_payment(loan, monthly_rate, term):
    return loan * monthly_rate / (1.0 - (1.0 + monthly_rate) ** (-term))


def synth_pricing_rows(n: int, rng: np.random.Generator, theta_star=None) -> tuple[list[str], np.ndarray]:
    """Schema-compatible synthetic auto-loan applications.

    Acceptance labels follow a logit model in the normalized design of
    ``pricing_design`` with parameter ``theta_star`` (default: a fixed vector
    with a negative price effect).
    """
    if n < 1:
        raise ValueError("need at least one row")
    fico = rng.uniform(600, 850, n)
    term = rng.choice([36, 48, 60, 72], n).astype(float)
    loan = np.round(rng.uniform(5000, 40000, n), 2)
    prime = rng.uniform(0.02, 0.05, n)
    competitor = prime + rng.uniform(0.01, 0.06, n)
    car = rng.integers(0, len(CAR_TYPES), n)
    spread = 0.02 + 0.10 * (850 - fico) / 250 + rng.uniform(0, 0.03, n)
    payment = np.round(_annuity_payment(loan, (prime + spread) / 12, term), 2)
    rate = prime / 12
    names = ["FICO", "Term", "Loan Amount", "Prime Rate", "Competitor Rate"]
    names += [f"Car Type {c}" for c in CAR_TYPES] + ["Monthly Payment", "Rate"]
    onehot = np.eye(len(CAR_TYPES))[car]
    data = np.column_stack([fico, term, loan, prime, competitor, onehot, payment, rate])
    price = npv_price(payment, term, rate, loan)
    x = pricing_design(data[:, :-2])
    if theta_star is None:
        theta_star = default_pricing_theta(x.shape[1])
    z = np.concatenate([x, (price / 25000.0)[:, None] * x], axis=1)
    p_apply = 1.0 / (1.0 + np.exp(-(z @ theta_star)))
    apply = (rng.random(n) < p_apply).astype(float)
    return names + ["Apply"], np.column_stack([data, apply])


def write_pricing_csv(path, header, data) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in data:
            w.writerow([f"{v:.10g}" for v in row])


def pricing_design(features: np.ndarray) -> np.ndarray:
    """Standardize feature columns (constant columns left at 0) and prepend an intercept.

    Rows are scaled to norm at most ``1/sqrt(2)`` so every ``(x, p x)`` context
    with ``p`` in ``[0, 1]`` lies in the unit ball.
    """
    f = np.asarray(features, dtype=float)
    mu, sd = f.mean(axis=0), f.std(axis=0)
    z = np.where(sd > 0, (f - mu) / np.where(sd > 0, sd, 1.0), 0.0)
    x = np.column_stack([np.ones(len(f)), z])
    return x * (1.0 / math.sqrt(2.0) / np.max(np.linalg.norm(x, axis=1)))


def default_pricing_theta(m: int) -> np.ndarray:
    """Unit-norm parameter: positive baseline demand, acceptance falling with price."""
    base = np.zeros(m)
    base[0] = 0.6
    base[1:] = np.linspace(0.2, -0.2, m - 1) / max(m - 1, 1) ** 0.5
    price = np.zeros(m)
    price[0] = -0.7
    theta = np.concatenate([base, price])
    return theta / np.linalg.norm(theta)


def fit_logit_theta(z: np.ndarray, y: np.ndarray, l2: float = 1e-4) -> np.ndarray:
    """Logistic-regression MLE with a small ridge term."""

    def nll(w):
        s = z @ w
        return float(np.sum(np.logaddexp(0.0, s) - y * s) / len(y) + 0.5 * l2 * w @ w)

    def grad(w):
        p = 1.0 / (1.0 + np.exp(-(z @ w)))
        return z.T @ (p - y) / len(y) + l2 * w

    res = scipy.optimize.minimize(nll, np.zeros(z.shape[1]), jac=grad, method="L-BFGS-B")
    return res.x


def pricing_synthetic(rows: int = 2000, seed: int = 0, regret_metric: str = "acceptance", csv_path: str = "") -> EnvSpec:
    """Pricing environment built from a loaded or freshly generated pricing table.

    With an ``Apply`` column the parameter is fit by logistic regression and
    rescaled to unit norm if needed; otherwise the default parameter is used.
    """
    if csv_path:
        table = load_pricing_csv(csv_path)
    else:
        header, data = synth_pricing_rows(rows, np.random.default_rng(seed))
        names = [h for h in header if h not in NON_FEATURES]
        idx = [header.index(n) for n in names]
        col = {h: data[:, i] for i, h in enumerate(header)}
        price = npv_price(col["Monthly Payment"], col["Term"], col["Rate"], col["Loan Amount"])
        table = PricingTable(names, data[:, idx], price, col["Apply"])
    x = pricing_design(table.features)
    grid = uniform_price_grid()
    if table.apply is not None:
        p = np.clip(table.price, grid[0], grid[-1]) / grid[-1]
        theta = fit_logit_theta(np.concatenate([x, p[:, None] * x], axis=1), table.apply)
        norm = np.linalg.norm(theta)
        if norm > 1:
            log.info("fitted pricing parameter has norm %.3f; rescaling to 1", norm)
            theta = theta / norm
    else:
        theta = default_pricing_theta(x.shape[1])
    return make_pricing_env(theta, grid, x.shape[1], features=x, regret_metric=regret_metric)


PRESETS["pricing_synthetic"] = pricing_synthetic
