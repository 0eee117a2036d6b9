"""``trihlab limit``: the four flat limit spectra, or a K1 penalty scan."""
from __future__ import annotations

import argparse
from pathlib import Path
from typing import Any

from ..models import SpectrumRecord
from ..services.cell import CellProblem, default_k1
from ..services.lab import DEFAULT_PROFILE, LimitMesh, k1_penalty_scan, load_config, reference_ordering, run_limit_problems
from ..store import dumps_record
from . import EXIT_CHECK_FAILED, EXIT_OK


def _k1_value(text: str) -> str | float:
    if text == "auto":
        return text
    try:
        value = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a number, got {text!r}") from exc
    if value < 0.0:
        raise argparse.ArgumentTypeError("k1 must be non-negative")
    return value


def register(subparsers: Any) -> None:
    parser = subparsers.add_parser("limit", help="Solve the flat limit problems")
    parser.add_argument("--config", type=Path, help="Take mesh and profile from a run config")
    parser.add_argument("--k1", type=_k1_value, default="auto", help="'auto' or a non-negative value")
    parser.add_argument("--count", type=int, default=5, help="Eigenvalues per spectrum")
    parser.add_argument("--elements-x", type=int, default=16)
    parser.add_argument("--elements-y", type=int, default=8)
    parser.add_argument("--scan", type=float, nargs="+", metavar="K1", help="Report λ₁(Â(K1)) for these K1 values")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    if args.config is not None:
        config = load_config(args.config)
        mesh = config.limit_mesh
        cell_problem = config.cell_problem
    else:
        mesh = LimitMesh(elements_x=args.elements_x, elements_y=args.elements_y)
        cell_problem = CellProblem(profile=DEFAULT_PROFILE)

    if args.scan:
        scan = k1_penalty_scan(mesh, sorted(args.scan))
        print(
            dumps_record(
                {
                    "k1": scan.k1_values,
                    "lambda1": scan.lambda1,
                    "lambda1_sbc": scan.lambda1_sbc,
                    "monotone": scan.monotone,
                    "below_sbc": scan.below_sbc,
                }
            )
        )
        return EXIT_OK if scan.monotone and scan.below_sbc else EXIT_CHECK_FAILED

    k1 = default_k1(cell_problem) if args.k1 == "auto" else float(args.k1)
    spectra = run_limit_problems(mesh, k1, args.count)
    ordered = reference_ordering(spectra, args.count)
    print(
        dumps_record(
            {
                "k1": k1,
                "ordering": ordered,
                "spectra": [SpectrumRecord.from_spectrum(name, spectrum) for name, spectrum in spectra.items()],
            }
        )
    )
    return EXIT_OK if ordered else EXIT_CHECK_FAILED
