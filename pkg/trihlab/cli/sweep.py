"""``trihlab sweep``: run a regime sweep from a TOML config."""
from __future__ import annotations

import argparse
from pathlib import Path
from typing import Any

from ..config import get_settings
from ..services.lab import defect_scaling, emit_results, load_config, run_sweep, trace_diagnostics
from ..store import dumps_record
from . import EXIT_CHECK_FAILED, EXIT_OK


def register(subparsers: Any) -> None:
    parser = subparsers.add_parser("sweep", help="Solve Ω_ε over an ε list and compare with the limit problems")
    parser.add_argument("--config", type=Path, required=True, help="TOML run config")
    parser.add_argument("--output", type=Path, help="Result directory (overrides the config)")
    parser.add_argument("--diagnostics", action="store_true", help="Also report trace and defect trends")
    parser.set_defaults(handler=run)


def _output_dir(args: argparse.Namespace, config_output: str | None, stem: str) -> Path:
    if args.output is not None:
        return args.output
    if config_output:
        return Path(config_output)
    return Path(get_settings().OUTPUT_DIR) / stem


def run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    result = run_sweep(config)
    directory = _output_dir(args, config.output, args.config.stem)
    csv_path, manifest_path = emit_results(result, directory)

    record: dict[str, Any] = {
        "regime": config.regime,
        "alpha": config.alpha,
        "k1": result.k1,
        "verdict": result.verdict,
        "csv": csv_path,
        "manifest": manifest_path,
        "warnings": list(result.warnings),
    }
    if args.diagnostics and result.points:
        traces = trace_diagnostics(result)
        defects = defect_scaling(result)
        record["traces"] = {
            "first_normal": traces.first_normal,
            "second_normal": traces.second_normal,
            "first_decreasing": traces.first_decreasing,
            "second_decreasing": traces.second_decreasing,
            "identity_residuals": traces.identity_residuals,
        }
        record["defect_scaled"] = defects.scaled
    print(dumps_record(record))
    return EXIT_CHECK_FAILED if result.verdict.passed is False else EXIT_OK
