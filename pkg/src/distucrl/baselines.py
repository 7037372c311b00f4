"""Round-robin UCRL2 at a central server over M environment interfaces.

The server handles agents 1..M in order within every step and may start a
new epoch after any single interaction, as soon as the epoch count of some
(s, a) reaches ``max(1, N_k(s, a))``. Every interaction is a communication.
With M=1 this is plain UCRL2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .confidence import VisitationCounts
from .coordinator import SyncLedger, synchronize
from .errors import ContractViolation
from .mdp_core import MdpModel, step
from .rng import DrawStream
from .trace import ExperimentTrace


@dataclass(frozen=True, order=True)
class ServerTime:
    """Server time ``(i, t)`` with 1-based agent ``i`` and step ``t``."""

    t: int
    i: int
    M: int

    def __post_init__(self):
        if not (1 <= self.i <= self.M and self.t >= 1):
            raise ContractViolation(f"invalid server time (i={self.i}, t={self.t}, M={self.M})")

    @property
    def linear(self) -> int:
        return self.M * (self.t - 1) + self.i

    @classmethod
    def from_linear(cls, n: int, M: int) -> "ServerTime":
        t, i = divmod(n - 1, M)
        return cls(t + 1, i + 1, M)

    def next(self) -> "ServerTime":
        if self.i < self.M:
            return ServerTime(self.t, self.i + 1, self.M)
        return ServerTime(self.t + 1, 1, self.M)

    def prev(self) -> "ServerTime":
        if self.i > 1:
            return ServerTime(self.t, self.i - 1, self.M)
        return ServerTime(self.t - 1, self.M, self.M)


def mod_ucrl2_run(
    mdp: MdpModel,
    M: int,
    T: int,
    seed: int,
    epsilon_override: float | None = None,
    clip_rewards: bool = False,
    max_evi_iters: int = 1_000_000,
    start_state: int = 0,
    env_name: str | None = None,
    algo: str = "mod_ucrl2",
) -> ExperimentTrace:
    if M < 1 or T < 1:
        raise ContractViolation("M and T must be positive")
    S, A = mdp.n_states, mdp.n_actions
    streams = [DrawStream.for_agent(seed, i, "env") for i in range(M)]
    current = [start_state] * M
    counts = VisitationCounts.zeros(S, A)
    ledger = SyncLedger()

    def new_epoch(t: int, linear: int, triggers):
        eps = 1.0 / math.sqrt(M * t) if epsilon_override is None else epsilon_override
        policy, n_k, result = synchronize([counts], t, M, eps, clip_rewards, max_evi_iters)
        ledger.record(linear, n_k, policy, triggers, result.iterations)
        return policy.action_of.tolist(), n_k.tolist()

    rewards = np.zeros((T, M))
    states = np.zeros((T, M), dtype=np.int64)
    actions = np.zeros((T, M), dtype=np.int64)
    epochs = np.zeros((T, M), dtype=np.int64)
    policy, n_k = new_epoch(1, 1, ())
    nu = [[0] * A for _ in range(S)]
    last = M * T
    for t in range(1, T + 1):
        row = t - 1
        for i in range(M):
            s = current[i]
            a = policy[s]
            s2, r = step(mdp, s, a, streams[i])
            counts.transition_counts[s, a, s2] += 1
            counts.reward_sums[s, a] += r
            current[i] = s2
            rewards[row, i] = r
            states[row, i] = s
            actions[row, i] = a
            epochs[row, i] = ledger.rounds
            nu[s][a] += 1
            linear = M * row + i + 1
            if nu[s][a] >= max(1, n_k[s][a]) and linear < last:
                t_next = t if i + 1 < M else t + 1
                policy, n_k = new_epoch(t_next, linear + 1, [(i, s, a)])
                nu = [[0] * A for _ in range(S)]
    comm = np.arange(1, M * T + 1, dtype=np.int64).reshape(T, M)
    return ExperimentTrace(
        algo=algo,
        env=env_name or mdp.name,
        M=M,
        T=T,
        seed=seed,
        n_states=S,
        n_actions=A,
        rewards=rewards,
        states=states,
        actions=actions,
        epochs=epochs,
        sync_rounds_cum=comm,
        ledger=ledger,
    )


def ucrl2_run(mdp: MdpModel, T: int, seed: int, **kwargs) -> ExperimentTrace:
    return mod_ucrl2_run(mdp, 1, T, seed, algo="ucrl2", **kwargs)
