"""Command line entry point: ``cartanlab check <config> ...``.

Exit status is 0 when every check passes, 1 when any fails and 2 when the
config cannot be loaded.
"""
from __future__ import annotations

import argparse
import sys

from .checks import CHECKS
from .report import emit_report, run_checks
from .scenario import ScenarioError, load_scenario

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cartanlab")
    sub = parser.add_subparsers(dest="command", required=True)
    check = sub.add_parser("check", help="run a scenario and print a report")
    check.add_argument("config", help="path to a TOML scenario file")
    check.add_argument("--format", choices=("json", "text"), default="text")
    check.add_argument("--seed", type=_seed)
    check.add_argument("--samples", type=_positive_int)
    check.add_argument("--atol", type=_positive_float)
    check.add_argument("--rtol", type=_positive_float)
    check.add_argument("--only", help="comma separated check names")
    check.add_argument("--workers", type=_positive_int, default=1,
                       help="threads used to evaluate points (output is unchanged)")
    check.add_argument("--output", help="write the report here instead of stdout")
    sub.add_parser("list-checks", help="print the registered check names")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-checks":
        print("\n".join(CHECKS))
        return EXIT_PASS
    try:
        scenario = load_scenario(args.config)
        only = None
        if args.only is not None:
            only = [c.strip() for c in args.only.split(",") if c.strip()]
        scenario = scenario.with_overrides(seed=args.seed, count=args.samples,
                                           atol=args.atol, rtol=args.rtol, only=only)
    except ScenarioError as exc:
        print(f"cartanlab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = run_checks(scenario, workers=args.workers)
    data = emit_report(report, args.format)
    if args.output:
        with open(args.output, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    return EXIT_PASS if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
