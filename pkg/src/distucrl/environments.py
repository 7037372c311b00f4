"""Benchmark MDPs: RiverSwim (6 and 12 states) and a 7x7 four-room grid world.

RiverSwim kernel (states 0..n-1, actions LEFT=0, RIGHT=1):

* LEFT is deterministic: s -> max(s-1, 0). Reward 0.05 at state 0, else 0.
* RIGHT in interior states: right 0.3, stay 0.6, left 0.1.
* RIGHT at state 0: stay 0.7, right 0.3.
* RIGHT at state n-1: stay 0.95, left 0.05, mean reward 1.

Four-room grid (``#`` wall, ``.`` free, ``G`` goal)::

    #######
    #..#..#
    #.....#
    ##.#.##
    #..#..#
    #....G#
    #######

20 free cells indexed in row-major order (state 0 is the top-left cell).
Actions UP, DOWN, LEFT, RIGHT succeed with probability ``1 - slip``; otherwise
one of the other three directions is taken uniformly. Bumping into a wall
leaves the agent in place. Every action taken in the goal cell has mean
reward 1; all other rewards are 0.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ContractViolation
from .mdp_core import MdpModel

LEFT, RIGHT = 0, 1
UP, DOWN, GLEFT, GRIGHT = 0, 1, 2, 3
_MOVES = {UP: (-1, 0), DOWN: (1, 0), GLEFT: (0, -1), GRIGHT: (0, 1)}

FOUR_ROOM_LAYOUT = (
    "#######",
    "#..#..#",
    "#.....#",
    "##.#.##",
    "#..#..#",
    "#....G#",
    "#######",
)

RIVERSWIM_DEFAULTS: dict[str, float] = {
    "interior_right": 0.3,
    "interior_stay": 0.6,
    "interior_left": 0.1,
    "start_stay": 0.7,
    "start_right": 0.3,
    "end_stay": 0.95,
    "end_left": 0.05,
    "small_reward": 0.05,
    "large_reward": 1.0,
}

GRIDWORLD_DEFAULTS: dict[str, Any] = {
    "layout": list(FOUR_ROOM_LAYOUT),
    "slip": 0.1,
    "goal_reward": 1.0,
}

ENV_NAMES = ("riverswim6", "riverswim12", "gridworld4room")


@dataclass
class EnvSpec:
    name: str
    parameters: dict[str, Any] = field(default_factory=dict)
    reward_noise: str = "bernoulli"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict | str) -> "EnvSpec":
        if isinstance(data, str):
            return cls(name=data)
        unknown = set(data) - {"name", "parameters", "reward_noise"}
        if unknown:
            raise ContractViolation(f"unknown EnvSpec keys: {sorted(unknown)}")
        return cls(
            name=data["name"],
            parameters=dict(data.get("parameters", {})),
            reward_noise=data.get("reward_noise", "bernoulli"),
        )

    def build(self) -> MdpModel:
        return make_env(self)


def make_env(spec: EnvSpec | str) -> MdpModel:
    if isinstance(spec, str):
        spec = EnvSpec(spec)
    if spec.name == "riverswim6":
        return make_riverswim(6, reward_noise=spec.reward_noise, **spec.parameters)
    if spec.name == "riverswim12":
        return make_riverswim(12, reward_noise=spec.reward_noise, **spec.parameters)
    if spec.name == "gridworld4room":
        return make_gridworld_4room(reward_noise=spec.reward_noise, **spec.parameters)
    if spec.name == "file":
        return load_kernel(spec.parameters["path"], reward_noise=spec.reward_noise)
    raise ContractViolation(f"unknown environment {spec.name!r}; expected one of {ENV_NAMES} or 'file'")


def make_riverswim(n: int, reward_noise: str = "bernoulli", **overrides: float) -> MdpModel:
    if n not in (6, 12):
        raise ContractViolation(f"RiverSwim supports n in {{6, 12}}, got {n}")
    unknown = set(overrides) - set(RIVERSWIM_DEFAULTS)
    if unknown:
        raise ContractViolation(f"unknown RiverSwim parameters: {sorted(unknown)}")
    c = {**RIVERSWIM_DEFAULTS, **overrides}
    p = np.zeros((n, 2, n))
    r = np.zeros((n, 2))
    for s in range(n):
        p[s, LEFT, max(s - 1, 0)] = 1.0
    p[0, RIGHT, 0] = c["start_stay"]
    p[0, RIGHT, 1] = c["start_right"]
    for s in range(1, n - 1):
        p[s, RIGHT, s - 1] = c["interior_left"]
        p[s, RIGHT, s] = c["interior_stay"]
        p[s, RIGHT, s + 1] = c["interior_right"]
    p[n - 1, RIGHT, n - 1] = c["end_stay"]
    p[n - 1, RIGHT, n - 2] = c["end_left"]
    r[0, LEFT] = c["small_reward"]
    r[n - 1, RIGHT] = c["large_reward"]
    return MdpModel(p, r, reward_noise=reward_noise, name=f"riverswim{n}")


def grid_cells(layout=FOUR_ROOM_LAYOUT) -> tuple[list[tuple[int, int]], tuple[int, int]]:
    """Free cells in row-major order, and the goal cell."""
    cells, goal = [], None
    for i, row in enumerate(layout):
        for j, ch in enumerate(row):
            if ch in ".G":
                cells.append((i, j))
            if ch == "G":
                goal = (i, j)
    if goal is None:
        raise ContractViolation("layout has no goal cell 'G'")
    return cells, goal


def _connected(cells: list[tuple[int, int]]) -> bool:
    free = set(cells)
    seen = {cells[0]}
    queue = deque([cells[0]])
    while queue:
        i, j = queue.popleft()
        for di, dj in _MOVES.values():
            nxt = (i + di, j + dj)
            if nxt in free and nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return len(seen) == len(free)


def make_gridworld_4room(
    slip: float = 0.1,
    goal_reward: float = 1.0,
    layout=FOUR_ROOM_LAYOUT,
    reward_noise: str = "bernoulli",
) -> MdpModel:
    if not 0.0 <= slip <= 1.0:
        raise ContractViolation("slip must lie in [0, 1]")
    cells, goal = grid_cells(layout)
    if not _connected(cells):
        raise ContractViolation("grid free cells are not connected: diameter would be infinite")
    index = {c: k for k, c in enumerate(cells)}
    S, A = len(cells), 4
    p = np.zeros((S, A, S))
    r = np.zeros((S, A))
    for s, (i, j) in enumerate(cells):
        landing = []
        for a in range(A):
            di, dj = _MOVES[a]
            landing.append(index.get((i + di, j + dj), s))
        for a in range(A):
            p[s, a, landing[a]] += 1.0 - slip
            for b in range(A):
                if b != a:
                    p[s, a, landing[b]] += slip / 3.0
    r[index[goal], :] = goal_reward
    # slip / 3 sums are not exact in binary; renormalize rows
    p /= p.sum(axis=2, keepdims=True)
    return MdpModel(p, r, reward_noise=reward_noise, name="gridworld4room")


def load_kernel(path: str | Path, reward_noise: str = "bernoulli") -> MdpModel:
    """Load an MDP from JSON ``{"transition": [[[...]]], "mean_reward": [[...]]}`` or an ``.npz``."""
    path = Path(path)
    if path.suffix == ".npz":
        with np.load(path) as data:
            return MdpModel(data["transition"], data["mean_reward"], reward_noise=reward_noise, name=path.stem)
    data = json.loads(path.read_text())
    return MdpModel(
        np.array(data["transition"], dtype=float),
        np.array(data["mean_reward"], dtype=float),
        reward_noise=data.get("reward_noise", reward_noise),
        name=data.get("name", path.stem),
    )
