"""Run configuration, loaded from JSON or built from CLI flags."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..environments import EnvSpec
from ..errors import ContractViolation

ALGORITHMS = ("dist_ucrl", "mod_ucrl2", "ucrl2")


def parse_transport(value) -> dict:
    """``"inproc"``, ``"tcp://host:port"`` or ``{"tcp": {"host": ..., "port": ...}}``."""
    if value in (None, "inproc"):
        return {"kind": "inproc"}
    if isinstance(value, dict):
        if set(value) == {"kind"} and value["kind"] == "inproc":
            return {"kind": "inproc"}
        if value.get("kind") == "tcp":
            return {"kind": "tcp", "host": value.get("host", "127.0.0.1"), "port": int(value.get("port", 0))}
        if set(value) == {"tcp"}:
            inner = value["tcp"] or {}
            return {"kind": "tcp", "host": inner.get("host", "127.0.0.1"), "port": int(inner.get("port", 0))}
    if isinstance(value, str) and value.startswith("tcp"):
        rest = value[len("tcp"):].lstrip(":/")
        host, _, port = rest.rpartition(":") if ":" in rest else (rest, "", "0")
        return {"kind": "tcp", "host": host or "127.0.0.1", "port": int(port or 0)}
    raise ContractViolation(f"unrecognized transport {value!r}")


@dataclass
class RunConfig:
    env: EnvSpec
    algorithm: str = "dist_ucrl"
    M: int = 1
    T: int = 20_000
    seeds: list[int] = field(default_factory=lambda: list(range(10)))
    epsilon_override: float | None = None
    output_dir: str = "runs"
    transport: dict = field(default_factory=lambda: {"kind": "inproc"})
    clip_rewards: bool = False
    max_evi_iters: int = 1_000_000
    record_wall_time: bool = False

    def __post_init__(self):
        if isinstance(self.env, (str, dict)):
            self.env = EnvSpec.from_dict(self.env)
        self.transport = parse_transport(self.transport)
        self.seeds = [int(s) for s in self.seeds]
        self.validate()

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ContractViolation(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.M < 1 or self.T < 1:
            raise ContractViolation("M and T must be >= 1")
        if not self.seeds:
            raise ContractViolation("at least one seed is required")
        if self.algorithm == "ucrl2" and self.M != 1:
            raise ContractViolation("ucrl2 requires M=1")
        if self.epsilon_override is not None and not self.epsilon_override > 0:
            raise ContractViolation("epsilon_override must be positive")
        if self.algorithm != "dist_ucrl" and self.transport["kind"] != "inproc":
            raise ContractViolation("only dist_ucrl runs over a network transport")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["env"] = self.env.to_dict()
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ContractViolation(f"unknown config keys: {sorted(unknown)}")
        if "env" not in data:
            raise ContractViolation("config needs an 'env'")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ContractViolation(f"{path}: invalid JSON ({e})") from None
        if not isinstance(data, dict):
            raise ContractViolation(f"{path}: config must be a JSON object")
        return cls.from_dict(data)

    def config_hash(self) -> str:
        d = self.to_dict()
        d.pop("output_dir")
        d.pop("seeds")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]
