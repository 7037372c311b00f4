"""Monte-Carlo and arithmetic checks of the concentration and summation lemmas."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ContractViolation


@dataclass(frozen=True)
class BoundRow:
    epsilon: float
    empirical: float
    bound: float
    slack: float
    flagged: bool


@dataclass(frozen=True)
class BoundReport:
    name: str
    rows: tuple[BoundRow, ...]

    @property
    def flagged(self) -> bool:
        return any(r.flagged for r in self.rows)

    def lines(self) -> list[str]:
        out = [f"{self.name}: epsilon, empirical, bound, slack, flagged"]
        for r in self.rows:
            out.append(f"  {r.epsilon:.6g}, {r.empirical:.6g}, {r.bound:.6g}, {r.slack:.3g}, {'FLAG' if r.flagged else 'ok'}")
        return out


def _tail_row(eps: float, empirical: float, bound: float, trials: int) -> BoundRow:
    b = min(1.0, bound)
    slack = 3.0 * math.sqrt(b * (1.0 - b) / trials)
    return BoundRow(float(eps), float(empirical), float(bound), slack, bool(empirical > b + slack))


def martingale_tail_bound(epsilon: float, M: int, T: int, c: float) -> float:
    """exp(-2 eps^2 / (M T c^2))."""
    return math.exp(-2.0 * epsilon**2 / (M * T * c**2))


def check_martingale_bound(M: int, T: int, c: float, epsilon_grid, trials: int, rng: np.random.Generator,
                           chunk: int = 512) -> BoundReport:
    """Tail frequency of the sum of ``M`` independent ``T``-step martingales against the bound.

    Each increment is a fair coin of size ``c / 2``, so ``|X| <= c`` holds with room.
    """
    if min(M, T, trials) < 1 or c <= 0:
        raise ContractViolation("M, T, trials must be >= 1 and c > 0")
    n = M * T
    sums = np.empty(trials)
    done = 0
    while done < trials:
        k = min(chunk, trials - done)
        heads = rng.integers(0, 2, size=(k, n), dtype=np.int8).sum(axis=1, dtype=np.int64)
        sums[done:done + k] = (2 * heads - n) * (c / 2.0)
        done += k
    rows = [
        _tail_row(eps, float(np.mean(sums >= eps)), martingale_tail_bound(eps, M, T, c), trials)
        for eps in epsilon_grid
    ]
    return BoundReport("independent-martingale tail", tuple(rows))


def l1_deviation_bound(epsilon: float, n: int, S: int) -> float:
    """2^S exp(-n eps^2 / 2)."""
    return (2.0**S) * math.exp(-n * epsilon**2 / 2.0)


def check_l1_deviation(p: np.ndarray, n: int, epsilon_grid, trials: int, rng: np.random.Generator) -> BoundReport:
    """Frequency of ``||p_hat - p||_1 >= eps`` for ``n``-sample empirical distributions."""
    p = np.asarray(p, dtype=float)
    counts = rng.multinomial(n, p, size=trials)
    dev = np.abs(counts / n - p[None]).sum(axis=1)
    rows = [
        _tail_row(eps, float(np.mean(dev >= eps)), l1_deviation_bound(eps, n, p.size), trials)
        for eps in epsilon_grid
    ]
    return BoundReport(f"l1 deviation (S={p.size}, n={n})", tuple(rows))


def sum_of_roots(z) -> tuple[float, float]:
    """``(sum_k z_k / sqrt(max(1, Z_{k-1})), (sqrt 2 + 1) sqrt(max(1, Z_n)))``.

    Raises if ``z`` is negative, decreasing, or has a term above ``max(1, prefix sum)``.
    """
    z = [float(x) for x in z]
    prefix = 0.0
    lhs = 0.0
    prev = -math.inf
    for k, zk in enumerate(z):
        floor = max(1.0, prefix)
        if zk < 0 or zk < prev or zk > floor:
            raise ContractViolation(f"z[{k}]={zk} violates 0 <= z_k, nondecreasing, z_k <= max(1, Z_k)={floor}")
        lhs += zk / math.sqrt(floor)
        prefix += zk
        prev = zk
    rhs = (math.sqrt(2.0) + 1.0) * math.sqrt(max(1.0, prefix))
    return lhs, rhs


def check_sum_of_roots(z) -> bool:
    lhs, rhs = sum_of_roots(z)
    return lhs <= rhs
