"""``trihlab`` command dispatcher."""
from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence

from .. import __version__
from ..config import get_settings
from ..logging import setup_logging
from . import EXIT_ERROR, cell, checks, limit, sweep


def _configure_logging(debug: bool) -> None:
    if debug:
        setup_logging(level=logging.DEBUG)
    else:
        setup_logging(level=get_settings().LOG_LEVEL)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trihlab", description="Triharmonic eigenvalue lab on oscillating domains")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for module in (sweep, cell, limit, checks):
        module.register(subparsers)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.debug)
    try:
        return int(args.handler(args))
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover - CLI entry point
    raise SystemExit(main())
