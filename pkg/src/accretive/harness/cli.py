"""``accretive`` command-line entry point.

Each subcommand runs one task from a key-value config file.  The JSON report
goes to stdout (or ``--report``); exit status is 0 on success, 1 on a usage
or config error and 2 on a property violation or non-convergence.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, parse_config, parse_document
from .runner import EXIT_FAILED, EXIT_OK, EXIT_USAGE, run

SUBCOMMANDS = {
    "check-axioms": "check_axioms",
    "check-property": "check_property",
    "resolve": "resolve",
    "yosida": "yosida",
    "resolvent-rate": "resolvent_rate",
    "fixed-point": "fixed_point",
    "solve-zero": "solve_zero",
    "solve-range": "solve_range",
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="path to the key-value config file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--tol", type=float, help="override the solver tolerance")
    p.add_argument("--max-iter", type=int, help="override the outer iteration cap")
    p.add_argument("--out", help="trace file path (default $ACCRETIVE_OUTPUT_DIR/<task>.csv)")
    p.add_argument("--report", help="write the JSON report here instead of stdout")
    p.add_argument("--timing", action="store_true", help="include wall-clock duration in the report")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="accretive", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        _add_common(sub.add_parser(name, help=f"run the {SUBCOMMANDS[name]} task"))
    acc = sub.add_parser("acceptance", help="run the acceptance criteria")
    acc.add_argument("--only", type=int, action="append", help="criterion number (repeatable)")
    acc.add_argument("-v", "--verbose", action="store_true")
    return parser


def _overrides(args, task: str) -> dict:
    o = {"task.name": task}
    if args.seed is not None:
        o["seed"] = args.seed
    if args.tol is not None:
        o["tol"] = repr(args.tol)
    if args.max_iter is not None:
        o["max_iter"] = args.max_iter
    return o


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "acceptance":
        from .acceptance import run_all
        results = run_all(args.only)
        for r in results:
            print(r.line())
        return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED

    task = SUBCOMMANDS[args.command]
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"accretive: cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        declared = parse_document(text).get("task.name")
        if declared is not None and declared.strip() != task:
            print(f"accretive: config task.name is {declared.strip()!r} but subcommand is {args.command!r}",
                  file=sys.stderr)
            return EXIT_USAGE
        cfg = parse_config(text, _overrides(args, task))
    except ConfigError as exc:
        print(f"accretive: {args.config}: {exc}", file=sys.stderr)
        return EXIT_USAGE

    report = run(cfg, out=args.out)
    text = report.to_json(include_timing=args.timing)
    if args.report:
        try:
            with open(args.report, "w") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"accretive: cannot write report: {exc}", file=sys.stderr)
            return EXIT_USAGE
    else:
        sys.stdout.write(text)
    if report.exit_code == EXIT_FAILED:
        print(f"accretive: {task} {report.status}: {report.witness}", file=sys.stderr)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
