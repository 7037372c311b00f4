"""Ground-truth tabular MDPs and exact-analysis oracles (optimal gain, diameter)."""

from __future__ import annotations

import bisect
from collections import deque
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .errors import ContractViolation, DivergedError

REWARD_NOISE = ("bernoulli", "deterministic")


class UniformSource(Protocol):
    def random(self) -> float: ...


def span(x: np.ndarray) -> float:
    return float(np.max(x) - np.min(x))


@dataclass(frozen=True, eq=False)
class MdpModel:
    """Tabular MDP with kernel ``transition[s, a, s']`` and mean rewards ``mean_reward[s, a]``."""

    transition: np.ndarray
    mean_reward: np.ndarray
    reward_noise: str = "bernoulli"
    name: str = "mdp"
    _cdf: list = field(init=False, repr=False)

    def __post_init__(self):
        p = np.array(self.transition, dtype=float)
        r = np.array(self.mean_reward, dtype=float)
        if p.ndim != 3 or p.shape[0] != p.shape[2] or p.shape[0] < 1 or p.shape[1] < 1:
            raise ContractViolation(f"transition must have shape (S, A, S), got {p.shape}")
        if r.shape != p.shape[:2]:
            raise ContractViolation(f"mean_reward must have shape {p.shape[:2]}, got {r.shape}")
        if np.any(p < 0) or np.any(p > 1):
            raise ContractViolation("transition probabilities must lie in [0, 1]")
        if np.any(r < 0) or np.any(r > 1):
            raise ContractViolation("mean rewards must lie in [0, 1]")
        rows = p.sum(axis=2)
        if np.max(np.abs(rows - 1.0)) > 1e-12:
            raise ContractViolation(f"kernel rows must sum to 1 (worst deviation {np.max(np.abs(rows - 1.0)):.3e})")
        if self.reward_noise not in REWARD_NOISE:
            raise ContractViolation(f"reward_noise must be one of {REWARD_NOISE}")
        p.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "mean_reward", r)

        cdf = np.cumsum(p, axis=2)
        table = []
        for s in range(p.shape[0]):
            per_action = []
            for a in range(p.shape[1]):
                row = cdf[s, a].copy()
                # pin the tail to 1 so u in [0, 1) never lands on a zero-mass state
                last = int(np.flatnonzero(p[s, a] > 0)[-1])
                row[last:] = 1.0
                per_action.append(row.tolist())
            table.append(per_action)
        object.__setattr__(self, "_cdf", table)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]


@dataclass(frozen=True, eq=False)
class Policy:
    """Deterministic stationary policy: ``action_of[s]`` is the action played in state ``s``."""

    action_of: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.action_of, dtype=np.int64).copy()
        if a.ndim != 1 or a.size == 0:
            raise ContractViolation("policy must be a non-empty 1-d array")
        if np.any(a < 0):
            raise ContractViolation("policy actions must be nonnegative")
        a.setflags(write=False)
        object.__setattr__(self, "action_of", a)

    def __call__(self, s: int) -> int:
        return int(self.action_of[s])

    def __eq__(self, other):
        return isinstance(other, Policy) and np.array_equal(self.action_of, other.action_of)

    def __hash__(self):
        return hash(self.action_of.tobytes())

    def validate(self, n_states: int, n_actions: int) -> None:
        if self.action_of.shape != (n_states,) or np.any(self.action_of >= n_actions):
            raise ContractViolation(f"policy does not fit an MDP with S={n_states}, A={n_actions}")


@dataclass(frozen=True)
class GainBias:
    gain: float
    bias: np.ndarray
    policy: Policy
    iterations: int = 0

    @property
    def bias_span(self) -> float:
        return span(self.bias)


def step(mdp: MdpModel, s: int, a: int, rng: UniformSource) -> tuple[int, float]:
    """Sample ``(next_state, reward)``; consumes exactly two uniforms (transition, then reward)."""
    if not (0 <= s < mdp.n_states and 0 <= a < mdp.n_actions):
        raise ContractViolation(f"(s={s}, a={a}) out of range for S={mdp.n_states}, A={mdp.n_actions}")
    u = rng.random()
    next_state = bisect.bisect_right(mdp._cdf[s][a], u)
    v = rng.random()
    mean = mdp.mean_reward[s, a]
    if mdp.reward_noise == "bernoulli":
        reward = 1.0 if v < mean else 0.0
    else:
        reward = float(mean)
    return next_state, reward


def optimal_gain(
    mdp: MdpModel,
    tol: float = 1e-8,
    max_iters: int = 1_000_000,
    ref_state: int = 0,
    aperiodicity: float = 0.5,
) -> GainBias:
    """Optimal average reward by relative value iteration on the true model.

    The kernel is mixed with the identity (weight ``1 - aperiodicity``) so that
    periodic chains still converge; gain and optimal policies are unchanged and
    the bias is rescaled back afterwards.
    """
    if tol <= 0:
        raise ContractViolation("tol must be positive")
    if not 0 <= ref_state < mdp.n_states:
        raise ContractViolation("ref_state out of range")
    tau = aperiodicity
    p, r = mdp.transition, mdp.mean_reward
    u = np.zeros(mdp.n_states)
    diff = np.zeros(mdp.n_states)
    for it in range(1, max_iters + 1):
        q = r + tau * (p @ u) + (1.0 - tau) * u[:, None]
        u_new = q.max(axis=1)
        diff = u_new - u
        u = u_new - u_new[ref_state]
        if span(diff) < tol:
            gain = 0.5 * (diff.max() + diff.min())
            h = tau * (u - u.min())
            q_true = r + p @ h
            policy = Policy(_argmax_first(q_true))
            return GainBias(float(gain), h, policy, it)
    raise DivergedError("relative value iteration did not converge", span(diff), max_iters)


def _argmax_first(q: np.ndarray) -> np.ndarray:
    # np.argmax already returns the lowest index among ties
    return np.argmax(q, axis=1)


def _reaches(mdp: MdpModel, target: int) -> np.ndarray:
    support = mdp.transition > 0
    reached = np.zeros(mdp.n_states, dtype=bool)
    reached[target] = True
    queue = deque([target])
    while queue:
        x = queue.popleft()
        preds = np.flatnonzero(support[:, :, x].any(axis=1) & ~reached)
        reached[preds] = True
        queue.extend(preds.tolist())
    return reached


def hitting_times(mdp: MdpModel, target: int, tol: float = 1e-6, max_iters: int = 10_000_000) -> np.ndarray:
    """Minimal expected hitting times of ``target`` from every state.

    Value iteration ``h(s) = 1 + min_a sum_s' P(s'|s,a) h(s')`` with ``h(target) = 0``,
    finished by exact policy evaluation of the greedy policy until it is stable.
    """
    S = mdp.n_states
    if not _reaches(mdp, target).all():
        raise DivergedError(f"state {target} is unreachable from some state (infinite diameter)", float("inf"), 0)
    p = mdp.transition
    h = np.zeros(S)
    delta = float("inf")
    for it in range(1, max_iters + 1):
        h_new = 1.0 + (p @ h).min(axis=1)
        h_new[target] = 0.0
        delta = float(np.max(np.abs(h_new - h)))
        h = h_new
        if delta < tol:
            break
    else:
        raise DivergedError("hitting-time iteration did not converge", delta, max_iters)
    return _polish_hitting_times(p, target, h)


def _polish_hitting_times(p: np.ndarray, target: int, h: np.ndarray) -> np.ndarray:
    S = p.shape[0]
    others = np.array([s for s in range(S) if s != target], dtype=int)
    if others.size == 0:
        return h
    best = h
    seen = set()
    for _ in range(4 * S + 10):
        acts = np.argmin(p @ best, axis=1)
        key = acts[others].tobytes()
        if key in seen:
            break
        seen.add(key)
        pp = p[others, acts[others]][:, others]
        try:
            sol = np.linalg.solve(np.eye(others.size) - pp, np.ones(others.size))
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(sol)) or np.any(sol < 1.0 - 1e-9):
            break
        cand = np.zeros(S)
        cand[others] = sol
        best = cand
    return best


def diameter(mdp: MdpModel, tol: float = 1e-6, max_iters: int = 10_000_000) -> float:
    """``max_{s' != s} min_pi E[T(s' | pi, s)]``; 0 for a single-state MDP."""
    if tol <= 0:
        raise ContractViolation("tol must be positive")
    worst = 0.0
    for target in range(mdp.n_states):
        h = hitting_times(mdp, target, tol=tol, max_iters=max_iters)
        worst = max(worst, float(np.delete(h, target).max(initial=0.0)))
    return worst
