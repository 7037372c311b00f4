"""Wire messages between agents and the coordinator, and the channels that carry them.

Every message is one JSON object on one line (UTF-8, ``\\n``-terminated),
compact separators, ``type`` first, remaining fields in a fixed order.

A synchronization round runs as follows:

1. every agent that raised the trigger sends ``sync_request`` (its own id, the new epoch's time);
2. the coordinator sends ``sync_request`` to every agent (recipient's id) to open the barrier;
3. every agent uploads ``counts_upload`` with its cumulative counters;
4. the coordinator sends ``policy_broadcast`` to every agent;
5. every agent answers ``ack``.

On connect, an agent registers with ``sync_request`` at ``time`` 0.
The initial round at t=1 skips step 1.
"""

from __future__ import annotations

import json
import math
import socket
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union


class ParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class SyncRequest:
    agent_id: int
    time: int


@dataclass(frozen=True)
class CountsUpload:
    agent_id: int
    n_states: int
    n_actions: int
    transition_counts: tuple[int, ...]
    reward_sums: tuple[float, ...]


@dataclass(frozen=True)
class PolicyBroadcast:
    epoch: int
    n_states: int
    n_actions: int
    policy: tuple[int, ...]
    n_global: tuple[int, ...]


@dataclass(frozen=True)
class Ack:
    epoch: int


SyncMessage = Union[SyncRequest, CountsUpload, PolicyBroadcast, Ack]

# (wire tag, class, [(wire key, attribute)])
_SCHEMA = {
    SyncRequest: ("sync_request", [("agent_id", "agent_id"), ("time", "time")]),
    CountsUpload: (
        "counts_upload",
        [
            ("agent_id", "agent_id"),
            ("S", "n_states"),
            ("A", "n_actions"),
            ("transition_counts", "transition_counts"),
            ("reward_sums", "reward_sums"),
        ],
    ),
    PolicyBroadcast: (
        "policy_broadcast",
        [("epoch", "epoch"), ("S", "n_states"), ("A", "n_actions"), ("policy", "policy"), ("n_global", "n_global")],
    ),
    Ack: ("ack", [("epoch", "epoch")]),
}
_BY_TAG = {tag: (cls, fields) for cls, (tag, fields) in _SCHEMA.items()}


def encode(msg: SyncMessage) -> bytes:
    try:
        tag, fields = _SCHEMA[type(msg)]
    except KeyError:
        raise SchemaError(f"not a sync message: {type(msg).__name__}") from None
    _validate(msg)
    obj = {"type": tag}
    for key, attr in fields:
        value = getattr(msg, attr)
        obj[key] = list(value) if isinstance(value, tuple) else value
    return json.dumps(obj, separators=(",", ":"), allow_nan=False).encode("utf-8") + b"\n"


def decode(line: bytes) -> SyncMessage:
    if not line.endswith(b"\n"):
        raise ParseError("truncated message: missing line terminator", len(line))
    body = line[:-1]
    nl = body.find(b"\n")
    if nl >= 0:
        raise ParseError("more than one message in line", nl)
    try:
        text = body.decode("utf-8")
    except UnicodeDecodeError as e:
        raise ParseError(f"invalid UTF-8 ({e.reason})", e.start) from None
    try:
        obj = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, len(text[: e.pos].encode("utf-8"))) from None
    if not isinstance(obj, dict):
        raise SchemaError("message must be a JSON object")
    tag = obj.get("type")
    if tag not in _BY_TAG:
        raise SchemaError(f"unknown message type {tag!r}")
    cls, fields = _BY_TAG[tag]
    expected = {"type"} | {key for key, _ in fields}
    if set(obj) != expected:
        raise SchemaError(f"{tag}: expected keys {sorted(expected)}, got {sorted(obj)}")
    kwargs = {}
    for key, attr in fields:
        value = obj[key]
        kwargs[attr] = tuple(value) if isinstance(value, list) else value
    msg = cls(**kwargs)
    _validate(msg)
    return msg


def _reject_constant(name):
    raise SchemaError(f"non-finite number {name} not allowed")


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _check_ints(name, values, length, minimum=0):
    if not isinstance(values, tuple) or len(values) != length:
        raise SchemaError(f"{name} must have {length} entries")
    for v in values:
        if not _is_int(v):
            raise SchemaError(f"{name} entries must be integers")
        if v < minimum:
            raise SchemaError(f"{name} entries must be >= {minimum}")


def _validate(msg) -> None:
    for attr in ("agent_id", "time", "epoch"):
        if hasattr(msg, attr):
            v = getattr(msg, attr)
            if not _is_int(v) or v < 0:
                raise SchemaError(f"{attr} must be a nonnegative integer")
    if isinstance(msg, (CountsUpload, PolicyBroadcast)):
        S, A = msg.n_states, msg.n_actions
        if not (_is_int(S) and _is_int(A) and S >= 1 and A >= 1):
            raise SchemaError("S and A must be positive integers")
    if isinstance(msg, CountsUpload):
        _check_ints("transition_counts", msg.transition_counts, S * A * S)
        if not isinstance(msg.reward_sums, tuple) or len(msg.reward_sums) != S * A:
            raise SchemaError(f"reward_sums must have {S * A} entries")
        for v in msg.reward_sums:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v < 0:
                raise SchemaError("reward_sums entries must be finite nonnegative numbers")
    elif isinstance(msg, PolicyBroadcast):
        _check_ints("policy", msg.policy, S)
        if any(a >= A for a in msg.policy):
            raise SchemaError("policy action out of range")
        _check_ints("n_global", msg.n_global, S * A)


def write_fixture(path: str | Path, messages: Iterable[SyncMessage]) -> None:
    Path(path).write_bytes(b"".join(encode(m) for m in messages))


def read_fixture(path: str | Path) -> list[SyncMessage]:
    data = Path(path).read_bytes()
    return [decode(line) for line in data.splitlines(keepends=True)]


class _Endpoint:
    """One side of a FIFO channel; counts bytes and records what it sent."""

    def __init__(self, record: bool = False):
        self.record = record
        self.bytes_sent = 0
        self.bytes_received = 0
        self.sent_log: list[bytes] = []

    def send(self, msg: SyncMessage) -> None:
        line = encode(msg)
        self.bytes_sent += len(line)
        if self.record:
            self.sent_log.append(line)
        self._write(line)

    def recv(self) -> SyncMessage:
        line = self._readline()
        self.bytes_received += len(line)
        return decode(line)

    def _write(self, line: bytes) -> None:
        raise NotImplementedError

    def _readline(self) -> bytes:
        raise NotImplementedError


class _QueueEndpoint(_Endpoint):
    def __init__(self, inbox: deque, outbox: deque, record: bool = False):
        super().__init__(record)
        self._inbox = inbox
        self._outbox = outbox

    def _write(self, line):
        self._outbox.append(line)

    def _readline(self):
        if not self._inbox:
            raise ConnectionError("no message pending on in-process channel")
        return self._inbox.popleft()


def inproc_pair(record: bool = False) -> tuple[_Endpoint, _Endpoint]:
    """(coordinator side, agent side) of one in-process channel."""
    a, b = deque(), deque()
    return _QueueEndpoint(a, b, record), _QueueEndpoint(b, a, record)


class _SocketEndpoint(_Endpoint):
    def __init__(self, sock: socket.socket, record: bool = False):
        super().__init__(record)
        self._sock = sock
        self._reader = sock.makefile("rb")

    def _write(self, line):
        self._sock.sendall(line)

    def _readline(self):
        line = self._reader.readline()
        if not line:
            raise ConnectionError("connection closed by peer")
        return line

    def close(self):
        self._reader.close()
        self._sock.close()


class Network:
    """Channels between one coordinator and ``M`` agents.

    ``kind`` is ``"inproc"`` or ``"tcp"``. With TCP the coordinator listens on
    ``(host, port)`` (port 0 picks a free one) and each agent connects as a client.
    """

    def __init__(self, M: int, kind: str = "inproc", host: str = "127.0.0.1", port: int = 0, record: bool = False):
        self.M = M
        self.kind = kind
        self.server: list[_Endpoint] = [None] * M
        self.agents: list[_Endpoint] = []
        self._listener = None
        if kind == "inproc":
            for i in range(M):
                srv, cli = inproc_pair(record)
                self.server[i] = srv
                self.agents.append(cli)
                cli.send(SyncRequest(i, 0))
                self._register(srv)
        elif kind == "tcp":
            self._listener = socket.create_server((host, port), backlog=M + 8)
            self.address = self._listener.getsockname()
            for i in range(M):
                cli = _SocketEndpoint(socket.create_connection(self.address[:2]), record)
                self.agents.append(cli)
                cli.send(SyncRequest(i, 0))
            for _ in range(M):
                conn, _ = self._listener.accept()
                self._register(_SocketEndpoint(conn, record))
        else:
            raise ValueError(f"unknown transport {kind!r}")

    def _register(self, endpoint: _Endpoint) -> None:
        hello = endpoint.recv()
        if not isinstance(hello, SyncRequest) or hello.time != 0 or not 0 <= hello.agent_id < self.M:
            raise SchemaError(f"bad registration message {hello!r}")
        if self.server[hello.agent_id] not in (None, endpoint):
            raise SchemaError(f"agent {hello.agent_id} registered twice")
        self.server[hello.agent_id] = endpoint

    @property
    def bytes_exchanged(self) -> int:
        return sum(e.bytes_sent for e in self.server) + sum(e.bytes_sent for e in self.agents)

    def transcript(self) -> list[bytes]:
        """Every line sent (needs ``record=True``), coordinator side then agent side, per agent."""
        out = []
        for i in range(self.M):
            out.extend(self.server[i].sent_log)
            out.extend(self.agents[i].sent_log)
        return out

    def close(self) -> None:
        for e in list(self.server) + self.agents:
            if isinstance(e, _SocketEndpoint):
                e.close()
        if self._listener is not None:
            self._listener.close()
