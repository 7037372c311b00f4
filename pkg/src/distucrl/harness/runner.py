"""Seeded multi-run execution with per-run invariant checks and CSV output."""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from ..baselines import mod_ucrl2_run
from ..coordinator import epoch_bound
from ..errors import ContractViolation, DivergedError, InvariantViolation
from ..mdp_core import optimal_gain
from ..simulation import run_dist_ucrl
from ..trace import ExperimentTrace, verify_trace, write_trace
from .config import RunConfig

log = logging.getLogger(__name__)

SUMMARY_COLUMNS = (
    "env", "algo", "M", "T", "seed", "final_regret", "per_agent_regret", "sync_rounds", "epoch_bound", "wall_ms",
)
RHO_STAR_TOL = 1e-8


@dataclass
class RunOutcome:
    seed: int
    trace: ExperimentTrace | None
    violations: list[str]
    error: str | None = None


def _run_one(config: RunConfig, seed: int, rho_star: float) -> RunOutcome:
    mdp = config.env.build()
    started = time.perf_counter()
    common = dict(
        epsilon_override=config.epsilon_override,
        clip_rewards=config.clip_rewards,
        max_evi_iters=config.max_evi_iters,
        env_name=config.env.name,
    )
    try:
        if config.algorithm == "dist_ucrl":
            tp = config.transport
            trace = run_dist_ucrl(mdp, config.M, config.T, seed, transport=tp["kind"],
                                  host=tp.get("host", "127.0.0.1"), port=tp.get("port", 0), **common)
        else:
            trace = mod_ucrl2_run(mdp, config.M, config.T, seed, algo=config.algorithm, **common)
    except DivergedError as e:
        return RunOutcome(seed, None, [], f"numerical failure: {e}")
    wall_ms = (time.perf_counter() - started) * 1000.0
    trace.metadata = {
        "config_hash": config.config_hash(),
        "rho_star": rho_star,
        "wall_ms": wall_ms,
        "bytes_exchanged": trace.ledger.bytes_exchanged,
    }
    return RunOutcome(seed, trace, verify_trace(trace))


def _bound_or_blank(config: RunConfig, S: int, A: int):
    if config.T * config.M < S * A:
        return ""
    return epoch_bound(config.M, S, A, config.T)


def summary_path(config: RunConfig) -> Path:
    return Path(config.output_dir) / f"summary_{config.env.name}_{config.algorithm}_M{config.M}_T{config.T}.csv"


def run_experiment(config: RunConfig, jobs: int = 1, write: bool = True) -> list[ExperimentTrace]:
    """Run every seed; write traces and a summary CSV; raise on any invariant violation.

    Runs that fail numerically are reported in the summary (blank metrics) and
    skipped; the returned list holds the successful traces in seed order.
    """
    config.validate()
    mdp = config.env.build()
    rho_star = optimal_gain(mdp, tol=RHO_STAR_TOL).gain
    if jobs > 1 and len(config.seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_one, [config] * len(config.seeds), config.seeds,
                                     [rho_star] * len(config.seeds)))
    else:
        outcomes = [_run_one(config, seed, rho_star) for seed in config.seeds]

    rows = []
    bound = _bound_or_blank(config, mdp.n_states, mdp.n_actions)
    for out in outcomes:
        if out.trace is None:
            log.error("seed %d failed: %s", out.seed, out.error)
            rows.append([config.env.name, config.algorithm, config.M, config.T, out.seed, "", "", "", bound, ""])
            continue
        tr = out.trace
        regret = tr.final_regret(rho_star)
        wall = round(tr.metadata["wall_ms"]) if config.record_wall_time else 0
        rows.append([config.env.name, config.algorithm, config.M, config.T, out.seed,
                     regret, regret / config.M, tr.sync_rounds, bound, wall])
        if write:
            write_trace(tr, config.output_dir)

    if write:
        out_dir = Path(config.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with summary_path(config).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SUMMARY_COLUMNS)
            w.writerows(rows)
        cfg_path = out_dir / f"config_{config.env.name}_{config.algorithm}_M{config.M}_T{config.T}.json"
        cfg_path.write_text(json.dumps(config.to_dict(), sort_keys=True, indent=1) + "\n")

    violations = [f"seed {o.seed}: {v}" for o in outcomes for v in o.violations]
    if violations:
        raise InvariantViolation(violations)
    failed = [o for o in outcomes if o.trace is None]
    if failed:
        raise RunFailures([f"seed {o.seed}: {o.error}" for o in failed], [o.trace for o in outcomes if o.trace])
    return [o.trace for o in outcomes]


class RunFailures(RuntimeError):
    """Some seeds failed numerically; the others completed and were written."""

    def __init__(self, messages: list[str], traces: list[ExperimentTrace]):
        super().__init__("; ".join(messages))
        self.messages = messages
        self.traces = traces


def load_summaries(directory: str | Path) -> list[dict]:
    rows = []
    for path in sorted(Path(directory).glob("summary_*.csv")):
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != SUMMARY_COLUMNS:
                raise ContractViolation(f"{path}: unexpected columns {reader.fieldnames}")
            rows.extend(reader)
    return rows
