"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 invariant violation, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from ..errors import ContractViolation, InvariantViolation
from ..trace import read_trace, verify_trace
from .bounds import check_martingale_bound, check_sum_of_roots, sum_of_roots
from .config import ALGORITHMS, RunConfig
from .runner import RunFailures, load_summaries, run_experiment
from .summary import export_gnuplot, summarize_rows

EXIT_OK, EXIT_USAGE, EXIT_INVARIANT, EXIT_NUMERICAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="distucrl", description="Communication-efficient parallel UCRL experiments")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run an experiment")
    run.add_argument("--config", type=Path, help="JSON file with RunConfig fields")
    run.add_argument("--env", default="riverswim6")
    run.add_argument("--algo", choices=ALGORITHMS, default="dist_ucrl")
    run.add_argument("--agents", type=int, default=1)
    run.add_argument("--horizon", type=int, default=20_000)
    run.add_argument("--seeds", type=int, default=10, help="number of seeds, numbered from --seed-start")
    run.add_argument("--seed-start", type=int, default=0)
    run.add_argument("--out", default="runs")
    run.add_argument("--epsilon", type=float, default=None, help="override the EVI accuracy 1/sqrt(Mt)")
    run.add_argument("--transport", default="inproc", help="inproc or tcp://host:port")
    run.add_argument("--clip-rewards", action="store_true")
    run.add_argument("--record-wall-time", action="store_true", help="fill wall_ms (makes the summary non-reproducible)")
    run.add_argument("--jobs", type=int, default=1, help="seeds run in parallel processes")

    summ = sub.add_parser("summarize", help="scaling report over summary CSVs in a directory")
    summ.add_argument("directory", type=Path)

    ver = sub.add_parser("verify", help="re-check every trace invariant in a directory")
    ver.add_argument("directory", type=Path)

    bench = sub.add_parser("bench-bounds", help="Monte-Carlo / arithmetic checks of the concentration lemmas")
    bench.add_argument("--lemma", choices=("martingale", "sumroots"), required=True)
    bench.add_argument("--agents", type=int, default=8)
    bench.add_argument("--length", type=int, default=1000)
    bench.add_argument("--c", type=float, default=2.0)
    bench.add_argument("--trials", type=int, default=10_000)
    bench.add_argument("--seed", type=int, default=0)

    gp = sub.add_parser("export-gnuplot", help="write gnuplot column files from traces in a directory")
    gp.add_argument("directory", type=Path)
    gp.add_argument("--stride", type=int, default=100)
    return p


def _cmd_run(args) -> int:
    if args.config is not None:
        config = RunConfig.from_file(args.config)
    else:
        config = RunConfig(
            env=args.env,
            algorithm=args.algo,
            M=args.agents,
            T=args.horizon,
            seeds=list(range(args.seed_start, args.seed_start + args.seeds)),
            epsilon_override=args.epsilon,
            output_dir=args.out,
            transport=args.transport,
            clip_rewards=args.clip_rewards,
            record_wall_time=args.record_wall_time,
        )
    traces = run_experiment(config, jobs=args.jobs)
    for tr in traces:
        print(f"{tr.tag}: reward={tr.total_reward:.1f} sync_rounds={tr.sync_rounds}")
    return EXIT_OK


def _cmd_summarize(args) -> int:
    rows = load_summaries(args.directory)
    if not rows:
        raise ContractViolation(f"no summary_*.csv files in {args.directory}")
    report = summarize_rows(rows)
    out = args.directory / "scaling.csv"
    report.write_csv(out)
    for r in report.rows:
        ratio = "" if r.ratio_to_previous is None else f" ratio={r.ratio_to_previous:.3f}"
        print(f"{r.env} {r.algo} M={r.M}: per-agent regret={r.mean_per_agent_regret:.1f}{ratio} "
              f"rounds={r.mean_sync_rounds:.1f} bound={r.epoch_bound}")
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    ledgers = sorted(args.directory.glob("*_ledger.json"))
    if not ledgers:
        raise ContractViolation(f"no traces in {args.directory}")
    bad = 0
    for path in ledgers:
        problems = verify_trace(read_trace(path))
        status = "ok" if not problems else f"{len(problems)} violation(s)"
        print(f"{path.name[:-len('_ledger.json')]}: {status}")
        for p in problems:
            print(f"  {p}")
        bad += bool(problems)
    print(f"{len(ledgers) - bad}/{len(ledgers)} traces clean")
    return EXIT_INVARIANT if bad else EXIT_OK


def _cmd_bench(args) -> int:
    if args.lemma == "martingale":
        scale = np.sqrt(args.agents * args.length)
        report = check_martingale_bound(args.agents, args.length, args.c, [f * scale for f in (0.5, 1, 2, 4)],
                                        args.trials, np.random.default_rng(args.seed))
        print("\n".join(report.lines()))
        return EXIT_INVARIANT if report.flagged else EXIT_OK
    ok = True
    sequences = {
        "(1, 1)": [1, 1],
        "doubling, n=30": [1, 1] + [2**k for k in range(1, 29)],
        "ones, n=1000": [1] * 1000,
    }
    for name, z in sequences.items():
        lhs, rhs = sum_of_roots(z)
        passed = check_sum_of_roots(z)
        ok &= passed
        print(f"{name}: lhs={lhs:.6g} rhs={rhs:.6g} {'ok' if passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_INVARIANT


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "summarize": _cmd_summarize,
        "verify": _cmd_verify,
        "bench-bounds": _cmd_bench,
        "export-gnuplot": lambda a: print("\n".join(map(str, export_gnuplot(a.directory, a.stride)))) or EXIT_OK,
    }
    try:
        return handlers[args.command](args)
    except ContractViolation as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantViolation as e:
        print(f"invariant violation: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    except RunFailures as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
