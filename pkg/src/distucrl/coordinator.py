"""Central server: aggregate counts, plan optimistically, broadcast, keep the round ledger."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .confidence import VisitationCounts, aggregate, build_plausible_set
from .errors import ContractViolation, DivergedError
from .evi import extended_value_iteration
from .mdp_core import Policy


@dataclass
class SyncLedger:
    """One entry per completed round (equivalently, per epoch)."""

    rounds: int = 0
    epoch_starts: list[int] = field(default_factory=list)
    n_snapshots: list[np.ndarray] = field(default_factory=list)
    # (agent_id, s, a) pairs whose trigger fired in the step that closed the previous epoch
    triggers: list[list[tuple[int, int, int]]] = field(default_factory=list)
    policies: list[np.ndarray] = field(default_factory=list)
    evi_iterations: list[int] = field(default_factory=list)
    bytes_exchanged: int = 0

    def record(self, t: int, n_global: np.ndarray, policy: Policy, triggers=(), evi_iterations: int = 0) -> None:
        if self.epoch_starts and t <= self.epoch_starts[-1]:
            raise ContractViolation(f"epoch start {t} does not follow {self.epoch_starts[-1]}")
        self.rounds += 1
        self.epoch_starts.append(int(t))
        self.n_snapshots.append(np.array(n_global, dtype=np.int64))
        self.triggers.append([tuple(int(x) for x in tr) for tr in triggers])
        self.policies.append(np.array(policy.action_of, dtype=np.int64))
        self.evi_iterations.append(int(evi_iterations))

    def to_dict(self) -> dict:
        return {
            "rounds": self.rounds,
            "epoch_starts": self.epoch_starts,
            "n_snapshots": [n.tolist() for n in self.n_snapshots],
            "triggers": [[list(tr) for tr in trs] for trs in self.triggers],
            "policies": [p.tolist() for p in self.policies],
            "evi_iterations": self.evi_iterations,
            "bytes_exchanged": self.bytes_exchanged,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SyncLedger":
        return cls(
            rounds=data["rounds"],
            epoch_starts=list(data["epoch_starts"]),
            n_snapshots=[np.array(n, dtype=np.int64) for n in data["n_snapshots"]],
            triggers=[[tuple(tr) for tr in trs] for trs in data["triggers"]],
            policies=[np.array(p, dtype=np.int64) for p in data["policies"]],
            evi_iterations=list(data["evi_iterations"]),
            bytes_exchanged=data["bytes_exchanged"],
        )


class NumericalFailure(DivergedError):
    """EVI failed to converge during a synchronization round."""


def synchronize(
    per_agent_counts: list[VisitationCounts],
    t: int,
    M: int,
    epsilon: float | None = None,
    clip_rewards: bool = False,
    max_evi_iters: int = 1_000_000,
):
    """Aggregate counts and run EVI at accuracy ``1/sqrt(M t)`` unless overridden.

    Returns ``(policy, N, evi_result)``.
    """
    if t < 1:
        raise ContractViolation("t must be >= 1")
    total = aggregate(per_agent_counts)
    plausible = build_plausible_set(total, t, M, clip_rewards=clip_rewards)
    eps = 1.0 / math.sqrt(M * t) if epsilon is None else epsilon
    result = extended_value_iteration(plausible, eps, max_iters=max_evi_iters)
    if not result.converged:
        raise NumericalFailure(f"EVI did not converge at t={t}", result.last_span, result.iterations)
    return result.policy, total.visit_counts, result


class Coordinator:
    def __init__(self, n_states: int, n_actions: int, M: int, epsilon_override: float | None = None,
                 clip_rewards: bool = False, max_evi_iters: int = 1_000_000):
        self.n_states = n_states
        self.n_actions = n_actions
        self.M = M
        self.epsilon_override = epsilon_override
        self.clip_rewards = clip_rewards
        self.max_evi_iters = max_evi_iters
        self.ledger = SyncLedger()

    def epsilon(self, t: int) -> float:
        return 1.0 / math.sqrt(self.M * t) if self.epsilon_override is None else self.epsilon_override

    def synchronize(self, per_agent_counts: list[VisitationCounts], t: int, triggers=()):
        if len(per_agent_counts) != self.M:
            raise ContractViolation(f"expected counts from {self.M} agents, got {len(per_agent_counts)}")
        policy, n_global, result = synchronize(
            per_agent_counts, t, self.M, self.epsilon(t), self.clip_rewards, self.max_evi_iters
        )
        self.ledger.record(t, n_global, policy, triggers, result.iterations)
        return policy, n_global


def epoch_bound(M: int, S: int, A: int, T: int) -> int:
    """ceil(1 + 2MAS + MAS log2(MT)), valid for T >= SA/M."""
    if min(M, S, A, T) < 1:
        raise ContractViolation("dimensions and horizon must be positive")
    if T * M < S * A:
        raise ContractViolation(f"bound requires T >= SA/M (T={T}, SA/M={S * A / M})")
    return math.ceil(1 + 2 * M * A * S + M * A * S * math.log2(M * T))


def epoch_bound_tight(M: int, S: int, A: int, T: int) -> int:
    """ceil(1 + 2MAS + MAS log2(MT/SA)), the form the counting argument actually ends with."""
    if T * M < S * A:
        raise ContractViolation(f"bound requires T >= SA/M (T={T}, SA/M={S * A / M})")
    return math.ceil(1 + 2 * M * A * S + M * A * S * math.log2(M * T / (S * A)))


def sequential_epoch_bound(M: int, S: int, A: int, T: int) -> float:
    """1 + SA + SA log2(MT/SA): epoch count bound for the round-robin baseline."""
    if T * M < S * A:
        raise ContractViolation(f"bound requires MT >= SA (MT={M * T}, SA={S * A})")
    return 1 + S * A + S * A * math.log2(M * T / (S * A))
