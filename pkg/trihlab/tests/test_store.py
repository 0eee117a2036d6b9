from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from trihlab.models import CheckRecord, SweepRow
from trihlab.store import (
    ResultWriteError,
    dumps_record,
    format_cell,
    read_csv,
    read_json,
    read_jsonl,
    write_csv,
    write_json,
    write_jsonl,
)


def test_format_cell_keeps_full_precision() -> None:
    assert format_cell(0.1) == "0.10000000000000001"
    assert format_cell(np.float64(1.0) / 3.0) == "0.33333333333333331"
    assert format_cell(np.int64(3)) == "3"
    assert format_cell(True) == "true"


def test_csv_uses_unix_line_endings(tmp_path: Path) -> None:
    path = tmp_path / "nested" / "table.csv"
    write_csv(path, [[1, 0.5], [2, 0.25]], ["j", "lambda"])
    assert path.read_bytes() == b"j,lambda\n1,0.5\n2,0.25\n"
    assert read_csv(path) == [{"j": "1", "lambda": "0.5"}, {"j": "2", "lambda": "0.25"}]


def test_json_normalizes_numpy_and_models(tmp_path: Path) -> None:
    path = tmp_path / "manifest.json"
    row = SweepRow(alpha=3.0, epsilon=0.25, j=1, lam=1.5, residual=1e-12, gap_A=0.1, gap_Ahat=0.2, gap_S=0.3, gap_D=0.4)
    write_json(path, {"values": np.arange(3.0), "row": row, "count": np.int32(2), "where": tmp_path})
    loaded = read_json(path)
    assert loaded["values"] == [0.0, 1.0, 2.0]
    assert loaded["row"]["lambda"] == 1.5
    assert loaded["count"] == 2
    assert loaded["where"] == str(tmp_path)
    assert path.read_text(encoding="utf-8").endswith("}\n")


def test_jsonl_round_trip(tmp_path: Path) -> None:
    records = [
        CheckRecord(case="a", lhs=1.0, rhs=1.0, residual=0.0, threshold=1e-12),
        CheckRecord(case="b", lhs=1.0, rhs=2.0, residual=1.0, threshold=1e-12),
    ]
    path = tmp_path / "checks.jsonl"
    write_jsonl(path, records)
    loaded = read_jsonl(path)
    assert [item["passed"] for item in loaded] == [True, False]
    assert dumps_record(records[0]).startswith('{"case": "a"')


def test_missing_files_read_as_empty(tmp_path: Path) -> None:
    assert read_json(tmp_path / "none.json") is None
    assert read_csv(tmp_path / "none.csv") == []
    assert read_jsonl(tmp_path / "none.jsonl") == []


def test_write_failures_carry_the_path(tmp_path: Path) -> None:
    blocker = tmp_path / "blocker"
    blocker.write_text("", encoding="utf-8")
    with pytest.raises(ResultWriteError, match="write_failed"):
        write_csv(blocker / "table.csv", [], ["j"])
