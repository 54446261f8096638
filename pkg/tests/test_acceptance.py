"""Exit criteria; each prints one PASS/FAIL line (run with -s to see them live)."""

from __future__ import annotations

import pytest

from singulyr.acceptance import CRITERIA, run_criterion


@pytest.mark.parametrize("number", range(1, len(CRITERIA) + 1), ids=[f"criterion_{n}" for n in range(1, len(CRITERIA) + 1)])
def test_criterion(number, capsys):
    result = run_criterion(number)
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.detail
