from __future__ import annotations

import json
import math
from pathlib import Path

import pytest

from trihlab.cli import EXIT_CHECK_FAILED, EXIT_ERROR, EXIT_OK
from trihlab.cli.main import main

CONFIGS = Path(__file__).resolve().parents[2] / "configs"


def _records(capsys: pytest.CaptureFixture[str]) -> list[dict]:
    out = capsys.readouterr().out
    return [json.loads(line) for line in out.splitlines() if line.strip()]


def test_version_flag(capsys: pytest.CaptureFixture[str]) -> None:
    with pytest.raises(SystemExit) as excinfo:
        main(["--version"])
    assert excinfo.value.code == 0
    assert "trihlab" in capsys.readouterr().out


def test_subcommand_is_required() -> None:
    with pytest.raises(SystemExit) as excinfo:
        main([])
    assert excinfo.value.code == 2


def test_oracle_check_passes(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    output = tmp_path / "oracle.jsonl"
    code = main(["oracle1d", "--bc", "sbc", "--count", "3", "--output", str(output)])
    assert code == EXIT_OK
    records = _records(capsys)
    assert len(records) == 3 and all(record["passed"] for record in records)
    assert len(output.read_text(encoding="utf-8").splitlines()) == 3


def test_failing_check_exits_with_two(capsys: pytest.CaptureFixture[str]) -> None:
    # Eight cubic elements cannot resolve the fourth eigenvalue to 1e-6.
    code = main(["oracle1d", "--bc", "dbc", "--count", "4", "--elements", "8", "--degree", "3"])
    assert code == EXIT_CHECK_FAILED
    assert any(not record["passed"] for record in _records(capsys))


def test_green_check(capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["green-check"]) == EXIT_OK
    assert all(record["passed"] for record in _records(capsys))


def test_avg_check_accepts_epsilons(capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["avg-check", "--epsilon", "0.125", "0.25", "0.0625"]) == EXIT_OK
    cases = [record["case"] for record in _records(capsys)]
    assert "sine_ratio:0.25->0.125" in cases


def test_missing_config_reports_error(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    code = main(["sweep", "--config", str(tmp_path / "absent.toml")])
    assert code == EXIT_ERROR
    assert capsys.readouterr().err.startswith("Error: config_unreadable")


def test_sweep_writes_results(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    output = tmp_path / "degenerate"
    code = main(["sweep", "--config", str(CONFIGS / "degenerate.toml"), "--output", str(output)])
    record = _records(capsys)[0]
    assert code in (EXIT_OK, EXIT_CHECK_FAILED)
    assert record["verdict"]["reference"] == "A"
    assert (output / "sweep.csv").exists() and (output / "manifest.json").exists()


def test_sweep_output_defaults_to_settings_dir(
    tmp_path: Path, monkeypatch: pytest.MonkeyPatch, capsys: pytest.CaptureFixture[str]
) -> None:
    config = tmp_path / "empty.toml"
    config.write_text(
        'regime = "strong"\nalpha = 0.5\nepsilons = []\nlimit_elements_x = 4\nlimit_elements_y = 4\nk1 = 0.0\n',
        encoding="utf-8",
    )
    monkeypatch.setenv("TRIHLAB_OUTPUT_DIR", str(tmp_path / "results"))
    assert main(["sweep", "--config", str(config)]) == EXIT_OK
    assert (tmp_path / "results" / "empty" / "sweep.csv").exists()
    assert _records(capsys)[0]["verdict"]["passed"] is None


def test_cell_with_constant_profile(capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["cell", "--offset", "2.0", "--no-brackets"]) == EXIT_OK
    report = _records(capsys)[0]
    assert report["K1_energy"] <= 1e-10
    assert report["K1_deep"] is None


def test_cell_modes_without_offset_use_the_default_offset(capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["cell", "--mode", "1", "1.0", "0.0", "--no-brackets"]) == EXIT_OK
    report = _records(capsys)[0]
    assert report["K1_energy"] == pytest.approx(14.0 / 15.0 * (2.0 * math.pi) ** 5, rel=1e-4)


def test_limit_scan(capsys: pytest.CaptureFixture[str]) -> None:
    code = main(["limit", "--elements-x", "4", "--elements-y", "4", "--scan", "10", "0", "1"])
    assert code == EXIT_OK
    record = _records(capsys)[0]
    assert record["k1"] == [0.0, 1.0, 10.0]
    assert record["monotone"] and record["below_sbc"]


def test_limit_spectra(capsys: pytest.CaptureFixture[str]) -> None:
    code = main(["limit", "--elements-x", "4", "--elements-y", "4", "--k1", "2.5", "--count", "2"])
    assert code == EXIT_OK
    record = _records(capsys)[0]
    assert record["k1"] == 2.5 and record["ordering"] is True
    assert [spectrum["name"] for spectrum in record["spectra"]] == ["A", "Ahat", "S", "D"]


def test_limit_rejects_negative_k1() -> None:
    with pytest.raises(SystemExit) as excinfo:
        main(["limit", "--k1", "-1"])
    assert excinfo.value.code == 2
