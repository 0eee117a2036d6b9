"""Identity-check subcommands: green-check, unfold-check, avg-check, oracle1d."""
from __future__ import annotations

import argparse
from pathlib import Path
from typing import Any, Callable, Sequence

from ..constants import DEFAULT_EPSILONS
from ..models import CheckRecord
from ..services.checks import average_suite, green_suite, oracle_suite, unfolding_suite
from ..store import dumps_record, write_jsonl
from . import EXIT_CHECK_FAILED, EXIT_OK


def _report(records: Sequence[CheckRecord], output: Path | None) -> int:
    for record in records:
        print(dumps_record(record))
    if output is not None:
        write_jsonl(output, records)
    return EXIT_OK if all(record.passed for record in records) else EXIT_CHECK_FAILED


def _add_common(parser: argparse.ArgumentParser, handler: Callable[[argparse.Namespace], int]) -> None:
    parser.add_argument("--output", type=Path, help="Also write the records as JSON lines")
    parser.set_defaults(handler=handler)


def _add_epsilons(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epsilon", type=float, nargs="+", default=list(DEFAULT_EPSILONS), help="ε values")


def register(subparsers: Any) -> None:
    green = subparsers.add_parser("green-check", help="Verify the triharmonic Green formula")
    _add_common(green, run_green)

    unfold = subparsers.add_parser("unfold-check", help="Verify unfolding and defect identities")
    _add_epsilons(unfold)
    _add_common(unfold, run_unfold)

    average = subparsers.add_parser("avg-check", help="Local-average convergence diagnostic")
    _add_epsilons(average)
    _add_common(average, run_average)

    oracle = subparsers.add_parser("oracle1d", help="Interval eigenvalues against the determinant oracle")
    oracle.add_argument("--bc", choices=("wbc", "sbc", "dbc"), required=True)
    oracle.add_argument("--count", type=int, default=4)
    oracle.add_argument("--elements", type=int, default=64)
    oracle.add_argument("--degree", type=int, default=5)
    _add_common(oracle, run_oracle)


def run_green(args: argparse.Namespace) -> int:
    return _report(green_suite(), args.output)


def run_unfold(args: argparse.Namespace) -> int:
    return _report(unfolding_suite(sorted(args.epsilon, reverse=True)), args.output)


def run_average(args: argparse.Namespace) -> int:
    return _report(average_suite(sorted(args.epsilon, reverse=True)), args.output)


def run_oracle(args: argparse.Namespace) -> int:
    return _report(oracle_suite(args.bc, args.count, elements=args.elements, degree=args.degree), args.output)
