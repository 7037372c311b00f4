"""Per-agent loop: act on the current policy, count, and raise the sync trigger."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .confidence import VisitationCounts
from .errors import ContractViolation
from .mdp_core import MdpModel, Policy, step
from .rng import DrawStream


def should_request_sync(nu: int, n_ref: int, M: int) -> bool:
    """True iff ``nu >= max(1, n_ref) / M`` (evaluated exactly in integers)."""
    if M < 1 or nu < 0 or n_ref < 0:
        raise ContractViolation("nu, n_ref must be >= 0 and M >= 1")
    return nu * M >= max(1, n_ref)


@dataclass
class StepOutcome:
    state: int
    action: int
    reward: float
    next_state: int
    sync_requested: bool


@dataclass
class AgentState:
    agent_id: int
    M: int
    rng: DrawStream
    lifetime_counts: VisitationCounts
    policy: Policy | None = None
    current_state: int = 0
    nu: np.ndarray = field(default=None)
    n_ref: np.ndarray = field(default=None)
    sync_requested: bool = False

    def __post_init__(self):
        S, A = self.lifetime_counts.shape
        if self.nu is None:
            self.nu = np.zeros((S, A), dtype=np.int64)
        if self.n_ref is None:
            self.n_ref = np.zeros((S, A), dtype=np.int64)

    @classmethod
    def fresh(cls, agent_id: int, M: int, n_states: int, n_actions: int, master_seed: int, start_state: int = 0):
        return cls(
            agent_id=agent_id,
            M=M,
            rng=DrawStream.for_agent(master_seed, agent_id, "env"),
            lifetime_counts=VisitationCounts.zeros(n_states, n_actions),
            current_state=start_state,
        )


def agent_step(agent: AgentState, mdp: MdpModel) -> StepOutcome:
    """Play ``policy(current_state)`` once and update all counters in place."""
    if agent.policy is None:
        raise ContractViolation(f"agent {agent.agent_id} has no policy; sync first")
    s = agent.current_state
    a = int(agent.policy.action_of[s])
    s2, r = step(mdp, s, a, agent.rng)
    agent.nu[s, a] += 1
    agent.lifetime_counts.transition_counts[s, a, s2] += 1
    agent.lifetime_counts.reward_sums[s, a] += r
    agent.current_state = s2
    if int(agent.nu[s, a]) * agent.M >= max(1, int(agent.n_ref[s, a])):
        agent.sync_requested = True
    return StepOutcome(s, a, r, s2, agent.sync_requested)


def apply_sync(agent: AgentState, policy: Policy, n_global: np.ndarray) -> AgentState:
    """Install a broadcast policy and global counts, and start a new epoch."""
    n_global = np.asarray(n_global)
    S, A = agent.lifetime_counts.shape
    if n_global.shape != (S, A):
        raise ContractViolation(f"n_global has shape {n_global.shape}, expected {(S, A)}")
    policy.validate(S, A)
    agent.policy = policy
    agent.n_ref = n_global.astype(np.int64, copy=True)
    agent.nu = np.zeros((S, A), dtype=np.int64)
    agent.sync_requested = False
    return agent
