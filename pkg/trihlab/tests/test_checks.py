"""The check suites behind the identity subcommands."""
from __future__ import annotations

import pytest

from trihlab.services.checks import average_suite, green_suite, oracle_suite, strip_corpus, unfolding_suite


def _failures(records):
    return [record.case for record in records if not record.passed]


def test_strip_corpus_has_twelve_pairs() -> None:
    names = [name for name, _, _ in strip_corpus()]
    assert len(names) == 12 and len(set(names)) == 12


def test_green_suite_passes() -> None:
    records = green_suite()
    assert _failures(records) == []
    assert sum(record.case.startswith("strip:") for record in records) == 12
    assert any(record.case.startswith("interval:") for record in records)


def test_unfolding_suite_passes() -> None:
    records = unfolding_suite((0.25, 0.125))
    assert _failures(records) == []
    assert any(record.case.startswith("defect_idempotent") for record in records)


def test_average_suite_passes() -> None:
    records = average_suite((0.25, 0.125, 0.0625))
    assert _failures(records) == []
    ratios = [record for record in records if record.case.startswith("sine_ratio")]
    assert len(ratios) == 2


@pytest.mark.parametrize("family", ["wbc", "sbc", "dbc"])
def test_oracle_suite_passes(family: str) -> None:
    records = oracle_suite(family, 3)
    assert len(records) == 3
    assert _failures(records) == []
