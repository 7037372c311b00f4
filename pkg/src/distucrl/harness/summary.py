"""Scaling reports across agent counts, and gnuplot column files."""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..coordinator import epoch_bound
from ..errors import ContractViolation
from ..trace import ExperimentTrace, read_trace, regret_series

SCALING_COLUMNS = (
    "env", "algo", "M", "runs", "mean_per_agent_regret", "ratio_to_previous_M", "mean_sync_rounds", "epoch_bound",
)


@dataclass(frozen=True)
class ScalingRow:
    env: str
    algo: str
    M: int
    runs: int
    mean_per_agent_regret: float
    ratio_to_previous: float | None
    mean_sync_rounds: float
    epoch_bound: int | None


@dataclass(frozen=True)
class ScalingReport:
    rows: tuple[ScalingRow, ...]

    def ratio(self, m_small: int, m_large: int) -> float:
        by_m = {r.M: r.mean_per_agent_regret for r in self.rows}
        return by_m[m_small] / by_m[m_large]

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SCALING_COLUMNS)
            for r in self.rows:
                w.writerow([r.env, r.algo, r.M, r.runs, r.mean_per_agent_regret,
                            "" if r.ratio_to_previous is None else r.ratio_to_previous,
                            r.mean_sync_rounds, "" if r.epoch_bound is None else r.epoch_bound])


def _rows_from_groups(env, algo, groups: dict[int, tuple[list[float], list[float], int | None]]) -> list[ScalingRow]:
    rows = []
    prev = None
    for M in sorted(groups):
        regrets, rounds, bound = groups[M]
        mean = float(np.mean(regrets))
        ratio = None if prev is None else prev / mean
        rows.append(ScalingRow(env, algo, M, len(regrets), mean, ratio, float(np.mean(rounds)), bound))
        prev = mean
    return rows


def summarize(traces_by_m: dict[int, list[ExperimentTrace]], rho_star: float) -> ScalingReport:
    """Mean final per-agent regret per M and the ratio between consecutive M levels."""
    if len(traces_by_m) < 2:
        raise ContractViolation("need traces for at least two values of M")
    first = next(iter(traces_by_m.values()))[0]
    groups = {}
    for M, traces in traces_by_m.items():
        if any(tr.M != M for tr in traces):
            raise ContractViolation(f"trace grouped under M={M} has a different M")
        regrets = [regret_series(tr, rho_star)[1][-1] for tr in traces]
        rounds = [tr.sync_rounds for tr in traces]
        S, A, T = first.n_states, first.n_actions, traces[0].T
        bound = epoch_bound(M, S, A, T) if T * M >= S * A else None
        groups[M] = (regrets, rounds, bound)
    return ScalingReport(tuple(_rows_from_groups(first.env, first.algo, groups)))


def summarize_rows(rows: list[dict]) -> ScalingReport:
    """Same report from summary-CSV rows, one block per (env, algo, T)."""
    grouped: dict[tuple, dict[int, list[dict]]] = defaultdict(lambda: defaultdict(list))
    for row in rows:
        if row["per_agent_regret"] == "":
            continue
        grouped[(row["env"], row["algo"], row["T"])][int(row["M"])].append(row)
    out = []
    for (env, algo, _), by_m in sorted(grouped.items()):
        groups = {}
        for M, rs in by_m.items():
            bound = rs[0]["epoch_bound"]
            groups[M] = (
                [float(r["per_agent_regret"]) for r in rs],
                [float(r["sync_rounds"]) for r in rs],
                int(bound) if bound != "" else None,
            )
        out.extend(_rows_from_groups(env, algo, groups))
    return ScalingReport(tuple(out))


def export_gnuplot(directory: str | Path, stride: int = 100) -> list[Path]:
    """Write ``<env>_<algo>_M<M>_T<T>.dat``: t, mean per-agent regret, std, mean sync rounds."""
    directory = Path(directory)
    groups: dict[str, list[ExperimentTrace]] = defaultdict(list)
    for ledger in sorted(directory.glob("*_ledger.json")):
        tr = read_trace(ledger)
        groups[f"{tr.env}_{tr.algo}_M{tr.M}_T{tr.T}"].append(tr)
    written = []
    for key, traces in sorted(groups.items()):
        rho = traces[0].metadata.get("rho_star")
        if rho is None:
            raise ContractViolation(f"{key}: metadata lacks rho_star")
        per_agent = np.array([regret_series(tr, rho)[1] for tr in traces])
        rounds = np.array([tr.sync_rounds_cum[:, -1] for tr in traces], dtype=float)
        T = traces[0].T
        idx = np.unique(np.r_[np.arange(stride - 1, T, stride), T - 1])
        path = directory / f"{key}.dat"
        with path.open("w") as fh:
            fh.write("# t mean_per_agent_regret std_per_agent_regret mean_sync_rounds\n")
            for i in idx:
                fh.write(f"{i + 1} {per_agent[:, i].mean()!r} {per_agent[:, i].std()!r} {rounds[:, i].mean()!r}\n")
        written.append(path)
    return written
