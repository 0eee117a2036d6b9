"""``trihlab cell``: solve the periodic cell problem and report K1."""
from __future__ import annotations

import argparse
from pathlib import Path
from typing import Any

from ..models import CellReport
from ..services.cell import CellProblem, solve_cell
from ..services.geometry import PeriodicProfile
from ..services.lab import DEFAULT_PROFILE, load_config
from ..store import dumps_record
from . import EXIT_OK


def register(subparsers: Any) -> None:
    parser = subparsers.add_parser("cell", help="Compute the strange-term constant K1")
    parser.add_argument("--config", type=Path, help="Take profile and [cell] settings from a run config")
    parser.add_argument("--offset", type=float, help="Profile offset (default: the default profile offset)")
    parser.add_argument(
        "--mode",
        nargs=3,
        action="append",
        type=float,
        metavar=("K", "COS", "SIN"),
        help="Profile mode: frequency, cosine and sine amplitude (repeatable)",
    )
    parser.add_argument("--depth", type=float, default=4.0, help="Truncation depth L")
    parser.add_argument("--bottom", choices=("free", "clamped"), default="free")
    parser.add_argument("--degree", type=int, default=5)
    parser.add_argument("--elements-per-period", type=int, help="Lateral elements")
    parser.add_argument("--no-brackets", action="store_true", help="Skip the other-bottom and 2L solves")
    parser.set_defaults(handler=run)


def _problem(args: argparse.Namespace) -> CellProblem:
    if args.config is not None:
        return load_config(args.config).cell_problem
    if args.offset is None and not args.mode:
        profile = DEFAULT_PROFILE
    else:
        modes = [(int(k), a, c) for k, a, c in args.mode or []]
        offset = args.offset if args.offset is not None else DEFAULT_PROFILE.offset
        profile = PeriodicProfile(offset=offset, modes=modes)
    return CellProblem(
        profile=profile,
        depth=args.depth,
        bottom=args.bottom,
        degree=args.degree,
        elements_per_period=args.elements_per_period,
    )


def run(args: argparse.Namespace) -> int:
    solution = solve_cell(_problem(args), brackets=not args.no_brackets)
    print(dumps_record(CellReport.from_solution(solution)))
    return EXIT_OK
