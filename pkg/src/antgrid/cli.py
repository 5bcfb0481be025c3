"""Command line entry point: ``antgrid run | sweep | summarize | detect-cycle``.

Exit codes: 0 when every verdict passes, 2 on any verifier or audit failure,
3 on configuration errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Any, Sequence

from antgrid.agents import AntProgramId, reachable_states
from antgrid.analysis import detect_cycle
from antgrid.errors import AntGridError, ConfigInvalid, NoBudgetExhaustion, Underdetermined
from antgrid.experiment import (
    dump_row,
    parse_config,
    row_passes,
    run_experiment,
    summarize_safe,
)
from antgrid.scheduler import trace_single_ant

EXIT_OK = 0
EXIT_FAILED = 2
EXIT_CONFIG = 3

log = logging.getLogger("antgrid")


def _default_seed() -> int:
    raw = os.environ.get("ANTGRID_SEED")
    if raw is None:
        return 0
    try:
        return int(raw, 0)
    except ValueError:
        raise ConfigInvalid("ANTGRID_SEED", f"not an integer: {raw!r}") from None


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--program", choices=[x.value for x in AntProgramId])
    p.add_argument("--k", type=int, help="number of ants")
    where = p.add_mutually_exclusive_group()
    where.add_argument("--treasure", metavar="X,Y", help="explicit treasure cell")
    where.add_argument("--distance", type=int, metavar="D", help="place the treasure at distance D")
    p.add_argument("--scheduler", metavar="{round-robin|random|script:FILE}")
    p.add_argument("--seed", type=int, help="seed for scheduling, faults and placement (default $ANTGRID_SEED or 0)")
    p.add_argument("--faults", metavar="FILE|random:F")
    p.add_argument("--budget", type=int, metavar="B", help="cap on total pheromone emissions")
    p.add_argument("--max-steps", type=int, metavar="N")
    p.add_argument("--mode", choices=["sync", "async"])
    p.add_argument("--emission", choices=["one-per-round", "on-first-schedule"])
    p.add_argument("--tm-listing-mode", action="store_true", default=None)
    p.add_argument("--trace", metavar="PATH", help="trace file (run) or directory (sweep)")
    p.add_argument("--report", metavar="PATH", help="JSON Lines report file")


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    return {
        "program": args.program,
        "k": args.k,
        "treasure": args.treasure,
        "distance": args.distance,
        "scheduler": args.scheduler,
        "seed": args.seed,
        "faults": args.faults,
        "budget": args.budget,
        "max_steps": args.max_steps,
        "mode": args.mode,
        "emission": args.emission,
        "tm_listing_mode": args.tm_listing_mode,
    }


def _load_spec(args: argparse.Namespace):
    overrides = _overrides(args)
    if overrides["seed"] is None and not (args.config and _file_has_seed(args.config)):
        overrides["seed"] = _default_seed()
    return parse_config(args.config, overrides)


def _file_has_seed(path: str) -> bool:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError):
        return False
    return isinstance(data, dict) and "seed" in data


def cmd_run(args: argparse.Namespace) -> int:
    spec = _load_spec(args)
    if spec.axes or spec.repetitions > 1:
        raise ConfigInvalid("sweep", "`run` takes a single configuration; use `sweep`")
    if args.trace:
        spec.trace_dir = None
    rows = list(_run_with_trace(spec, args.trace, args.report))
    row = rows[0]
    print(dump_row(row))
    return EXIT_OK if row_passes(row) else EXIT_FAILED


def _run_with_trace(spec, trace_path: str | None, report: str | None):
    if trace_path is None:
        yield from run_experiment(spec, report)
        return
    from antgrid.experiment import run_cell

    row = run_cell(spec.cell_params()[0], trace_path, spec.base_dir)
    if report:
        with open(report, "w") as fh:
            fh.write(dump_row(row) + "\n")
    yield row


def cmd_sweep(args: argparse.Namespace) -> int:
    spec = _load_spec(args)
    if args.workers is not None:
        spec.workers = args.workers
    if args.repetitions is not None:
        spec.repetitions = args.repetitions
    if args.trace:
        spec.trace_dir = args.trace
    ok = True
    n = 0
    for row in run_experiment(spec, args.report):
        n += 1
        ok = ok and row_passes(row)
        if not args.report:
            print(dump_row(row))
    log.info("%d rows, %s", n, "all passed" if ok else "failures present")
    return EXIT_OK if ok else EXIT_FAILED


def cmd_summarize(args: argparse.Namespace) -> int:
    try:
        result = summarize_safe(args.report_path)
    except OSError as e:
        raise ConfigInvalid("report", str(e)) from e
    print(json.dumps(result, indent=2))
    return EXIT_OK if result["passed"] else EXIT_FAILED


def cmd_detect_cycle(args: argparse.Namespace) -> int:
    program = AntProgramId(args.program or "async-fsm")
    if not program.is_fsm:
        raise ConfigInvalid("program", "cycle detection needs a finite-state program")
    if args.budget is not None and args.budget < 0:
        raise ConfigInvalid("budget", "must be >= 0")
    S = len(reachable_states(program))
    steps = args.max_steps or (S + 1) ** 2 + 64 * ((args.budget or 0) + 4) ** 2
    _, trace = trace_single_ant(program, args.budget, steps)
    try:
        report = detect_cycle(trace, program)
    except NoBudgetExhaustion as e:
        print(json.dumps(e.payload()))
        return EXIT_FAILED
    out = report.to_dict()
    out["program"] = program.value
    out["budget"] = args.budget
    out["steps_simulated"] = len(trace.records)
    print(json.dumps(out))
    return EXIT_OK if report.cycle_found or args.budget is None else EXIT_FAILED


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors: exit 3, not argparse's 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="antgrid", description="Pheromone-guided treasure search on the grid.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single run; prints one report row")
    p.add_argument("--config", metavar="FILE", help="JSON config; flags override its fields")
    _add_run_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="expand a sweep spec and run every cell")
    p.add_argument("config", nargs="?", metavar="FILE")
    _add_run_flags(p)
    p.add_argument("--workers", type=int, help="parallel worker processes")
    p.add_argument("--repetitions", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("summarize", help="fit round counts and audit a report")
    p.add_argument("report_path", metavar="REPORT")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("detect-cycle", help="single ant under a pheromone budget")
    p.add_argument("--program", choices=[x.value for x in AntProgramId if x.is_fsm])
    p.add_argument("--budget", type=int, metavar="B")
    p.add_argument("--max-steps", type=int, metavar="N")
    p.set_defaults(func=cmd_detect_cycle)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigInvalid as e:
        print(json.dumps(e.payload()), file=sys.stderr)
        return EXIT_CONFIG
    except Underdetermined as e:
        print(json.dumps(e.payload()), file=sys.stderr)
        return EXIT_FAILED
    except AntGridError as e:
        print(json.dumps(e.payload()), file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
