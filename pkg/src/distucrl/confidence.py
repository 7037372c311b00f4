"""Empirical model estimation and the confidence radii of the plausible-MDP set."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import ContractViolation


@dataclass
class VisitationCounts:
    """Transition counts ``C[s, a, s']`` and reward sums ``R[s, a]``."""

    transition_counts: np.ndarray
    reward_sums: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.transition_counts)
        r = np.asarray(self.reward_sums, dtype=float)
        if c.ndim != 3 or c.shape[0] != c.shape[2] or r.shape != c.shape[:2]:
            raise ContractViolation(f"inconsistent count shapes {c.shape} / {r.shape}")
        if np.any(c < 0) or np.any(r < 0):
            raise ContractViolation("counts must be nonnegative")
        self.transition_counts = c.astype(np.int64, copy=False)
        self.reward_sums = r

    @classmethod
    def zeros(cls, n_states: int, n_actions: int) -> "VisitationCounts":
        return cls(
            np.zeros((n_states, n_actions, n_states), dtype=np.int64),
            np.zeros((n_states, n_actions)),
        )

    @property
    def shape(self) -> tuple[int, int]:
        return self.reward_sums.shape

    @property
    def visit_counts(self) -> np.ndarray:
        return self.transition_counts.sum(axis=2)

    def record(self, s: int, a: int, next_state: int, reward: float) -> None:
        self.transition_counts[s, a, next_state] += 1
        self.reward_sums[s, a] += reward

    def copy(self) -> "VisitationCounts":
        return VisitationCounts(self.transition_counts.copy(), self.reward_sums.copy())

    def __eq__(self, other):
        return (
            isinstance(other, VisitationCounts)
            and np.array_equal(self.transition_counts, other.transition_counts)
            and np.array_equal(self.reward_sums, other.reward_sums)
        )


def aggregate(per_agent: list[VisitationCounts]) -> VisitationCounts:
    if not per_agent:
        raise ContractViolation("aggregate needs at least one agent")
    shapes = {c.transition_counts.shape for c in per_agent}
    if len(shapes) != 1:
        raise ContractViolation(f"dimension mismatch across agents: {sorted(shapes)}")
    return VisitationCounts(
        reduce(np.add, (c.transition_counts for c in per_agent)).copy(),
        reduce(np.add, (c.reward_sums for c in per_agent)).copy(),
    )


def _check_time(t) -> None:
    if t < 1:
        raise ContractViolation(f"time index must be >= 1, got {t}")


def reward_radius(N, t: int, M: int, S: int, A: int):
    """sqrt(7 ln(2 M S A t) / (2 max(1, N))); vectorizes over ``N``."""
    _check_time(t)
    n = np.maximum(1, N)
    out = np.sqrt(7.0 * math.log(2.0 * M * S * A * t) / (2.0 * n))
    return float(out) if np.ndim(out) == 0 else out


def transition_radius(N, t: int, M: int, S: int, A: int):
    """sqrt(14 S ln(2 M A t) / max(1, N)); vectorizes over ``N``."""
    _check_time(t)
    n = np.maximum(1, N)
    out = np.sqrt(14.0 * S * math.log(2.0 * M * A * t) / n)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class PlausibleSet:
    p_hat: np.ndarray
    r_hat: np.ndarray
    r_tilde: np.ndarray
    d: np.ndarray
    reward_rad: np.ndarray
    t: int
    M: int

    @property
    def n_states(self) -> int:
        return self.p_hat.shape[0]

    @property
    def n_actions(self) -> int:
        return self.p_hat.shape[1]

    def contains(self, transition: np.ndarray, mean_reward: np.ndarray) -> bool:
        """Whether a model lies inside every per-(s, a) confidence ball."""
        l1 = np.abs(self.p_hat - transition).sum(axis=2)
        return bool(np.all(l1 <= self.d) and np.all(np.abs(mean_reward - self.r_hat) <= self.reward_rad))


def build_plausible_set(counts: VisitationCounts, t: int, M: int, clip_rewards: bool = False) -> PlausibleSet:
    """Estimates and radii from aggregated counts.

    Rows never visited get a uniform ``p_hat``. Optimistic rewards are left
    unclipped unless ``clip_rewards`` is set.
    """
    _check_time(t)
    S, A = counts.shape
    n = counts.visit_counts
    denom = np.maximum(1, n)
    p_hat = counts.transition_counts / denom[:, :, None]
    p_hat[n == 0] = 1.0 / S
    r_hat = counts.reward_sums / denom
    rad = reward_radius(n, t, M, S, A)
    r_tilde = r_hat + rad
    if clip_rewards:
        r_tilde = np.minimum(1.0, r_tilde)
    d = transition_radius(n, t, M, S, A)
    return PlausibleSet(p_hat=p_hat, r_hat=r_hat, r_tilde=r_tilde, d=d, reward_rad=rad, t=int(t), M=int(M))
