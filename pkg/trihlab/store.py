"""Helpers for writing sweep tables, manifests and check records."""
from __future__ import annotations

import csv
import json
from collections.abc import Mapping, Sequence, Set as AbstractSet
from pathlib import Path
from typing import Any, Iterable

import numpy as np

FLOAT_FORMAT = "%.17g"


class ResultWriteError(OSError):
    """Raised when a result file cannot be written; carries the path."""


def _normalize_json(value: Any) -> Any:
    """Convert *value* into a JSON-serializable structure."""

    if isinstance(value, np.ndarray):
        return _normalize_json(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if isinstance(value, Path):
        return str(value)
    if hasattr(value, "model_dump"):
        return _normalize_json(value.model_dump(mode="json", by_alias=True))
    if isinstance(value, Mapping):
        return {str(key): _normalize_json(val) for key, val in value.items()}
    if isinstance(value, AbstractSet):
        return [_normalize_json(val) for val in sorted(value)]
    if isinstance(value, Sequence) and not isinstance(value, (str, bytes, bytearray)):
        return [_normalize_json(val) for val in value]
    return str(value)


def format_cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % float(value)
    return str(value)


def write_json(path: Path, payload: Any) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            json.dump(_normalize_json(payload), fh, ensure_ascii=False, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise ResultWriteError(f"write_failed:{path}: {exc}") from exc


def read_json(path: Path) -> Any:
    if not path.exists():
        return None
    with path.open("r", encoding="utf-8") as fh:
        return json.load(fh)


def write_csv(path: Path, rows: Iterable[Iterable[Any]], header: list[str]) -> None:
    """Write ``rows`` with ``%.17g`` floats and ``\\n`` line endings."""

    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_cell(item) for item in row])
    except OSError as exc:
        raise ResultWriteError(f"write_failed:{path}: {exc}") from exc


def read_csv(path: Path) -> list[dict[str, str]]:
    if not path.exists():
        return []
    with path.open("r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def dumps_record(item: Any) -> str:
    """One compact JSON line for stdout reports."""

    return json.dumps(_normalize_json(item), ensure_ascii=False, sort_keys=True)


def write_jsonl(path: Path, items: Iterable[Any]) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            for item in items:
                fh.write(dumps_record(item))
                fh.write("\n")
    except OSError as exc:
        raise ResultWriteError(f"write_failed:{path}: {exc}") from exc


def read_jsonl(path: Path) -> list[dict[str, Any]]:
    if not path.exists():
        return []
    data: list[dict[str, Any]] = []
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            data.append(json.loads(line))
    return data
