"""Round records, regret traces and seeded random streams shared by both algorithms."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class RoundRecord:
    t: int
    chosen_arm: int
    instant_regret: float
    cum_regret: float
    estimate_error: float | None = None


@dataclass
class RegretTrace:
    """Per-round outcome of one run plus the metadata needed to label it."""

    algo: str
    epsilon: float
    delta: float
    seed: int
    env: str
    t: np.ndarray
    cum_regret: np.ndarray
    chosen: np.ndarray
    estimate_error: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    @classmethod
    def from_records(cls, records, **meta) -> "RegretTrace":
        records = list(records)
        errors = [r.estimate_error for r in records]
        return cls(
            t=np.array([r.t for r in records], dtype=np.int64),
            cum_regret=np.array([r.cum_regret for r in records], dtype=float),
            chosen=np.array([r.chosen_arm for r in records], dtype=np.int64),
            estimate_error=None if not records or errors[0] is None else np.array(errors, dtype=float),
            **meta,
        )

    @property
    def T(self) -> int:
        return int(self.t[-1]) if self.t.size else 0

    @property
    def total_regret(self) -> float:
        return float(self.cum_regret[-1]) if self.cum_regret.size else 0.0

    def regret_at(self, t: int) -> float:
        """Cumulative regret after round ``t`` (``t == 0`` gives 0)."""
        if t == 0:
            return 0.0
        idx = np.searchsorted(self.t, t)
        if idx >= self.t.size or self.t[idx] != t:
            raise KeyError(f"round {t} not on this trace's grid")
        return float(self.cum_regret[idx])

    def logged(self, stride: int) -> "RegretTrace":
        """Subsample to rounds ``stride, 2 stride, ...`` plus the final round."""
        if stride < 1:
            raise ValueError("log stride must be >= 1")
        keep = (self.t % stride == 0) | (self.t == self.T)
        return RegretTrace(
            algo=self.algo, epsilon=self.epsilon, delta=self.delta, seed=self.seed, env=self.env,
            t=self.t[keep], cum_regret=self.cum_regret[keep], chosen=self.chosen[keep],
            estimate_error=None if self.estimate_error is None else self.estimate_error[keep],
            info=dict(self.info),
        )


@dataclass
class Streams:
    """Independent generators for contexts, rewards and the privacy mechanism.

    Keeping contexts and rewards on their own streams means two algorithms run
    with the same seed face the same context sequence.
    """

    context: np.random.Generator
    reward: np.random.Generator
    mechanism: np.random.Generator
    mechanism_seq: np.random.SeedSequence

    @classmethod
    def from_seed(cls, seed: int) -> "Streams":
        ctx, rew, mech = np.random.SeedSequence(seed).spawn(3)
        return cls(np.random.default_rng(ctx), np.random.default_rng(rew), np.random.default_rng(mech), mech)

    def arm_streams(self, K: int) -> list[np.random.Generator]:
        """One mechanism substream per arm (used for synthetic updates)."""
        return [np.random.default_rng(s) for s in self.mechanism_seq.spawn(K)]
