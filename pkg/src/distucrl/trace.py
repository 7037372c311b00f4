"""Experiment traces, regret computation, and trace invariant checks."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coordinator import SyncLedger, epoch_bound, sequential_epoch_bound
from .errors import ContractViolation, InvariantViolation

STEP_COLUMNS = ("t", "agent_id", "reward", "epoch", "sync_rounds_cum")
TRAJ_COLUMNS = ("t", "agent_id", "state", "action")


@dataclass(eq=False)
class ExperimentTrace:
    """Per-step, per-agent log of one run.

    Arrays are indexed ``[t - 1, agent_id]``. ``epochs`` is the 1-based epoch
    in force for that interaction; ``sync_rounds_cum`` counts communication
    rounds completed so far (dist-UCRL: sync rounds; round-robin baseline:
    one per interaction).
    """

    algo: str
    env: str
    M: int
    T: int
    seed: int
    n_states: int
    n_actions: int
    rewards: np.ndarray
    states: np.ndarray
    actions: np.ndarray
    epochs: np.ndarray
    sync_rounds_cum: np.ndarray
    ledger: SyncLedger
    metadata: dict = field(default_factory=dict)

    @property
    def sync_rounds(self) -> int:
        return int(self.sync_rounds_cum[-1, -1])

    @property
    def total_reward(self) -> float:
        return float(self.rewards.sum())

    @property
    def tag(self) -> str:
        return f"{self.env}_{self.algo}_M{self.M}_T{self.T}_seed{self.seed}"

    def final_regret(self, rho_star: float) -> float:
        return float(regret_series(self, rho_star)[0][-1])


def regret_series(trace: ExperimentTrace, rho_star: float) -> tuple[np.ndarray, np.ndarray]:
    """``(rho* M t - sum of rewards through t, same / M)`` for t = 1..T."""
    rewards = np.asarray(trace.rewards, dtype=float)
    if rewards.shape != (trace.T, trace.M):
        raise ContractViolation(f"rewards have shape {rewards.shape}, expected {(trace.T, trace.M)}")
    t = np.arange(1, trace.T + 1)
    total = rho_star * trace.M * t - np.cumsum(rewards.sum(axis=1))
    return total, total / trace.M


# ---------------------------------------------------------------- persistence

def write_trace(trace: ExperimentTrace, out_dir: str | Path) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    T, M = trace.T, trace.M
    t_col = np.repeat(np.arange(1, T + 1), M).tolist()
    a_col = np.tile(np.arange(M), T).tolist()
    steps = out_dir / f"{trace.tag}_steps.csv"
    with steps.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STEP_COLUMNS)
        w.writerows(zip(t_col, a_col, trace.rewards.ravel().tolist(), trace.epochs.ravel().tolist(),
                        trace.sync_rounds_cum.ravel().tolist()))
    traj = out_dir / f"{trace.tag}_traj.csv"
    with traj.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJ_COLUMNS)
        w.writerows(zip(t_col, a_col, trace.states.ravel().tolist(), trace.actions.ravel().tolist()))
    ledger = out_dir / f"{trace.tag}_ledger.json"
    header = {
        "algo": trace.algo, "env": trace.env, "M": M, "T": T, "seed": trace.seed,
        "n_states": trace.n_states, "n_actions": trace.n_actions,
    }
    ledger.write_text(json.dumps({**header, "ledger": trace.ledger.to_dict()}, sort_keys=True) + "\n")
    meta = out_dir / f"{trace.tag}_meta.json"
    meta.write_text(json.dumps({**header, **trace.metadata}, sort_keys=True, indent=1) + "\n")
    return {"steps": steps, "traj": traj, "ledger": ledger, "meta": meta}


def read_trace(ledger_path: str | Path) -> ExperimentTrace:
    ledger_path = Path(ledger_path)
    stem = ledger_path.name[: -len("_ledger.json")]
    head = json.loads(ledger_path.read_text())
    T, M = head["T"], head["M"]
    steps = np.loadtxt(ledger_path.with_name(f"{stem}_steps.csv"), delimiter=",", skiprows=1, ndmin=2)
    traj = np.loadtxt(ledger_path.with_name(f"{stem}_traj.csv"), delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    if steps.shape[0] != T * M or traj.shape[0] != T * M:
        raise ContractViolation(f"{stem}: expected {T * M} rows")
    meta_path = ledger_path.with_name(f"{stem}_meta.json")
    metadata = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return ExperimentTrace(
        algo=head["algo"], env=head["env"], M=M, T=T, seed=head["seed"],
        n_states=head["n_states"], n_actions=head["n_actions"],
        rewards=steps[:, 2].reshape(T, M),
        states=traj[:, 2].reshape(T, M),
        actions=traj[:, 3].reshape(T, M),
        epochs=steps[:, 3].astype(np.int64).reshape(T, M),
        sync_rounds_cum=steps[:, 4].astype(np.int64).reshape(T, M),
        ledger=SyncLedger.from_dict(head["ledger"]),
        metadata=metadata,
    )


# ---------------------------------------------------------------- invariants

def _pair_counts(states, actions, S, A) -> np.ndarray:
    n = np.zeros((S, A), dtype=np.int64)
    np.add.at(n, (states.ravel(), actions.ravel()), 1)
    return n


def verify_trace(trace: ExperimentTrace) -> list[str]:
    """Re-derive epoch statistics from the trajectory and check every structural invariant.

    Returns a list of human-readable violations (empty when the trace is clean).
    """
    if trace.algo in ("dist_ucrl",):
        return _verify_dist(trace)
    if trace.algo in ("mod_ucrl2", "ucrl2"):
        return _verify_sequential(trace)
    raise ContractViolation(f"unknown algorithm {trace.algo!r}")


def assert_trace(trace: ExperimentTrace) -> None:
    problems = verify_trace(trace)
    if problems:
        raise InvariantViolation(problems)


def _common(trace: ExperimentTrace, out: list[str]) -> None:
    T, M = trace.T, trace.M
    for name in ("rewards", "states", "actions", "epochs", "sync_rounds_cum"):
        if getattr(trace, name).shape != (T, M):
            out.append(f"{name} has shape {getattr(trace, name).shape}, expected {(T, M)}")
    if np.any(trace.rewards < 0) or np.any(trace.rewards > 1):
        out.append("reward outside [0, 1]")
    if np.any(np.diff(trace.sync_rounds_cum.ravel()) < 0):
        out.append("sync-round counter decreased")
    if np.any(np.diff(trace.epochs.ravel()) < 0):
        out.append("epoch index decreased")
    led = trace.ledger
    if led.rounds != len(led.epoch_starts):
        out.append(f"ledger rounds {led.rounds} != {len(led.epoch_starts)} epoch starts")
    if not led.epoch_starts or led.epoch_starts[0] != 1:
        out.append("first epoch must start at t=1")
    if any(b <= a for a, b in zip(led.epoch_starts, led.epoch_starts[1:])):
        out.append("epoch starts not strictly increasing")


def _verify_dist(trace: ExperimentTrace) -> list[str]:
    out: list[str] = []
    _common(trace, out)
    if out:
        return out
    T, M, S, A = trace.T, trace.M, trace.n_states, trace.n_actions
    led = trace.ledger
    starts = led.epoch_starts + [T + 1]
    epochs_per_t = trace.epochs[:, 0]
    if np.any(trace.epochs != epochs_per_t[:, None]):
        out.append("agents disagree on the epoch index within a step")
    if np.any(trace.sync_rounds_cum != trace.sync_rounds_cum[:, :1]):
        out.append("agents disagree on the round counter within a step")
    if trace.sync_rounds != led.rounds:
        out.append(f"step log reports {trace.sync_rounds} rounds, ledger {led.rounds}")
    n_running = np.zeros((S, A), dtype=np.int64)
    for k in range(led.rounds):
        lo, hi = starts[k], starts[k + 1]
        if hi > T + 1 or hi <= lo:
            out.append(f"epoch {k + 1} has invalid span [{lo}, {hi})")
            break
        sl = slice(lo - 1, hi - 1)
        if np.any(epochs_per_t[sl] != k + 1):
            out.append(f"steps in [{lo}, {hi}) not labelled epoch {k + 1}")
        if np.any(trace.sync_rounds_cum[sl] != k + 1):
            out.append(f"round counter in epoch {k + 1} is not {k + 1}")
        n_k = led.n_snapshots[k]
        if not np.array_equal(n_k, n_running):
            out.append(f"epoch {k + 1}: ledger N_k differs from the trajectory-derived counts")
            n_k = n_running.copy()
        pol = led.policies[k]
        st, ac = trace.states[sl], trace.actions[sl]
        if np.any(ac != pol[st]):
            out.append(f"epoch {k + 1}: an action deviates from the epoch policy")
        # per-agent epoch counts nu_{i,k}
        nu = np.zeros((M, S, A), dtype=np.int64)
        for i in range(M):
            np.add.at(nu[i], (st[:, i], ac[:, i]), 1)
        cap = -(-np.maximum(1, n_k) // M)
        if np.any(nu > cap[None]):
            i, s, a = np.argwhere(nu > cap[None])[0]
            out.append(f"epoch {k + 1}: agent {i} visited ({s},{a}) {nu[i, s, a]} > ceil(max(1,N_k)/M)={cap[s, a]}")
        total_nu = nu.sum(axis=0)
        lemma = np.maximum(1, n_k) + M - 1
        if np.any(total_nu > lemma):
            s, a = np.argwhere(total_nu > lemma)[0]
            out.append(f"epoch {k + 1}: sum_i nu({s},{a})={total_nu[s, a]} exceeds max(1,N_k)+M-1={lemma[s, a]}")
        # the epoch closes exactly when some agent reaches its trigger
        hit = nu * M >= np.maximum(1, n_k)[None]
        closes = k + 1 < led.rounds
        if closes and not hit.any():
            out.append(f"epoch {k + 1} closed without any trigger firing")
        if closes:
            for i, s, a in led.triggers[k + 1]:
                if not hit[i, s, a]:
                    out.append(f"round {k + 2}: recorded trigger ({i},{s},{a}) did not meet its threshold")
        if hi - lo > 1:
            early = np.zeros((M, S, A), dtype=np.int64)
            for i in range(M):
                np.add.at(early[i], (st[:-1, i], ac[:-1, i]), 1)
            if np.any(early * M >= np.maximum(1, n_k)[None]):
                out.append(f"epoch {k + 1} continued past a fired trigger")
        n_next = n_running + total_nu
        if closes:
            for i, s, a in led.triggers[k + 1]:
                if n_k[s, a] > 0 and n_next[s, a] * M < n_k[s, a] * (M + 1):
                    out.append(f"round {k + 2}: N({s},{a}) grew {n_k[s, a]} -> {n_next[s, a]}, below factor 1+1/M")
        n_running = n_next
    if T * M >= S * A:
        bound = epoch_bound(M, S, A, T)
        if led.rounds > bound:
            out.append(f"{led.rounds} rounds exceed the bound {bound}")
    return out


def _verify_sequential(trace: ExperimentTrace) -> list[str]:
    out: list[str] = []
    _common(trace, out)
    if out:
        return out
    T, M, S, A = trace.T, trace.M, trace.n_states, trace.n_actions
    led = trace.ledger
    expected_comm = np.arange(1, T * M + 1).reshape(T, M)
    if not np.array_equal(trace.sync_rounds_cum, expected_comm):
        out.append("round-robin baseline must count one communication per interaction")
    flat_s, flat_a = trace.states.ravel(), trace.actions.ravel()
    flat_e = trace.epochs.ravel()
    starts = led.epoch_starts + [T * M + 1]
    n_running = np.zeros((S, A), dtype=np.int64)
    for k in range(led.rounds):
        lo, hi = starts[k], starts[k + 1]
        sl = slice(lo - 1, hi - 1)
        if np.any(flat_e[sl] != k + 1):
            out.append(f"interactions [{lo}, {hi}) not labelled epoch {k + 1}")
        if not np.array_equal(led.n_snapshots[k], n_running):
            out.append(f"epoch {k + 1}: ledger N_k differs from the trajectory-derived counts")
        if np.any(flat_a[sl] != led.policies[k][flat_s[sl]]):
            out.append(f"epoch {k + 1}: an action deviates from the epoch policy")
        nu = _pair_counts(flat_s[sl], flat_a[sl], S, A)
        cap = np.maximum(1, n_running)
        if np.any(nu > cap):
            s, a = np.argwhere(nu > cap)[0]
            out.append(f"epoch {k + 1}: nu({s},{a})={nu[s, a]} exceeds max(1,N_k)={cap[s, a]}")
        if k + 1 < led.rounds and not np.any(nu >= cap):
            out.append(f"epoch {k + 1} closed without reaching max(1,N_k) anywhere")
        n_running = n_running + nu
    if T * M >= S * A:
        bound = sequential_epoch_bound(M, S, A, T)
        if led.rounds > bound:
            out.append(f"{led.rounds} epochs exceed 1+SA+SA*log2(MT/SA)={bound:.2f}")
    return out
