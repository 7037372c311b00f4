"""Extended value iteration over an l1-ball plausible set.

Each backup picks, per (s, a), the transition row inside the ball
``||q - p_hat(.|s, a)||_1 <= d(s, a)`` that maximizes expected utility,
then maximizes over actions. Iteration stops once the span of successive
utility differences drops below ``epsilon``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .confidence import PlausibleSet
from .errors import ContractViolation
from .mdp_core import Policy


@dataclass(frozen=True, eq=False)
class EviResult:
    policy: Policy
    utilities: np.ndarray
    gain_estimate: float
    iterations: int
    converged: bool
    last_span: float


@njit(cache=True)
def _inner_max_sorted(p, d, order, out):
    # order: states by decreasing utility, ties by increasing index
    S = p.shape[0]
    for j in range(S):
        out[j] = p[j]
    best = order[0]
    add = min(1.0 - p[best], 0.5 * d)
    if add <= 0.0:
        return
    if add == 1.0 - p[best]:
        # the ball reaches the vertex; avoid leaving rounding residue elsewhere
        for j in range(S):
            out[j] = 0.0
        out[best] = 1.0
        return
    out[best] = p[best] + add
    excess = add
    l = S - 1
    while excess > 0.0 and l > 0:
        s = order[l]
        take = min(out[s], excess)
        out[s] -= take
        excess -= take
        l -= 1


@njit(cache=True)
def _utility_order(u):
    return np.argsort(-u, kind="mergesort")


@njit(cache=True)
def _evi_kernel(p_hat, d, r_tilde, epsilon, max_iters):
    S, A = r_tilde.shape
    u = np.empty(S)
    policy = np.zeros(S, dtype=np.int64)
    for s in range(S):
        best = r_tilde[s, 0]
        arg = 0
        for a in range(1, A):
            if r_tilde[s, a] > best:
                best = r_tilde[s, a]
                arg = a
        u[s] = best
        policy[s] = arg
    # u_0 = 0, so the first difference is u_1 itself
    diff = u.copy()
    u = u - u.min()
    q = np.empty(S)
    u_new = np.empty(S)
    iterations = 1
    sp = diff.max() - diff.min()
    while sp >= epsilon:
        if iterations >= max_iters:
            return policy, u, 0.5 * (diff.max() + diff.min()), iterations, False, sp
        order = _utility_order(u)
        for s in range(S):
            best = -np.inf
            arg = 0
            for a in range(A):
                _inner_max_sorted(p_hat[s, a], d[s, a], order, q)
                val = r_tilde[s, a]
                for x in range(S):
                    val += q[x] * u[x]
                if val > best:
                    best = val
                    arg = a
            u_new[s] = best
            policy[s] = arg
        for s in range(S):
            diff[s] = u_new[s] - u[s]
        lo = u_new.min()
        for s in range(S):
            u[s] = u_new[s] - lo
        iterations += 1
        sp = diff.max() - diff.min()
    return policy, u, 0.5 * (diff.max() + diff.min()), iterations, True, sp


def inner_max(p_hat_row, d: float, utilities) -> np.ndarray:
    """Distribution within l1-distance ``d`` of ``p_hat_row`` maximizing ``q @ utilities``."""
    p = np.asarray(p_hat_row, dtype=float)
    u = np.asarray(utilities, dtype=float)
    if p.ndim != 1 or u.shape != p.shape:
        raise ContractViolation("p_hat_row and utilities must be 1-d arrays of equal length")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ContractViolation("p_hat_row must be a probability distribution")
    if d < 0:
        raise ContractViolation("radius must be nonnegative")
    out = np.empty_like(p)
    _inner_max_sorted(p, float(d), _utility_order(u), out)
    return out


def extended_value_iteration(plausible: PlausibleSet, epsilon: float, max_iters: int = 1_000_000) -> EviResult:
    if not epsilon > 0:
        raise ContractViolation(f"epsilon must be positive, got {epsilon}")
    policy, u, gain, iterations, converged, sp = _evi_kernel(
        np.ascontiguousarray(plausible.p_hat, dtype=float),
        np.ascontiguousarray(plausible.d, dtype=float),
        np.ascontiguousarray(plausible.r_tilde, dtype=float),
        float(epsilon),
        int(max_iters),
    )
    return EviResult(Policy(policy), u, float(gain), int(iterations), bool(converged), float(sp))
