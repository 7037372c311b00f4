"""Seed splitting and buffered random streams.

A master seed is split into independent streams by hashing
``(master_seed, agent_id, purpose)`` with BLAKE2b into a 64-bit key for a
Philox counter-based generator. The result is bit-exact across platforms.
"""

from __future__ import annotations

import hashlib

import numpy as np

_BLOCK = 4096


def stream_seed(master_seed: int, agent_id: int, purpose: str) -> int:
    token = f"{int(master_seed)}:{int(agent_id)}:{purpose}".encode()
    return int.from_bytes(hashlib.blake2b(token, digest_size=8).digest(), "little")


def make_generator(master_seed: int, agent_id: int, purpose: str) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(stream_seed(master_seed, agent_id, purpose)))


class DrawStream:
    """Uniform draws from a generator, fetched in blocks.

    ``random()`` returns exactly the sequence that repeated
    ``generator.random()`` calls would, without the per-call overhead.
    """

    __slots__ = ("_gen", "_buf", "_pos", "drawn")

    def __init__(self, generator: np.random.Generator):
        self._gen = generator
        self._buf: list[float] = []
        self._pos = 0
        self.drawn = 0

    @classmethod
    def for_agent(cls, master_seed: int, agent_id: int, purpose: str = "env") -> "DrawStream":
        return cls(make_generator(master_seed, agent_id, purpose))

    def random(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self._gen.random(_BLOCK).tolist()
            self._pos = 0
        x = self._buf[self._pos]
        self._pos += 1
        self.drawn += 1
        return x
