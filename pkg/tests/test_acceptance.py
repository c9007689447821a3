"""Acceptance criteria 1-10; each test prints one PASS/FAIL line.

Run directly (``python3 tests/test_acceptance.py``) for just the summary lines.
"""

import sys

import pytest

from ldp_bandit.acceptance import CHECKS

SLOW = {5, 6, 7, 10}


def _report(number, capsys):
    result = CHECKS[number]()
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.detail


@pytest.mark.parametrize(
    "number",
    [pytest.param(n, id=f"criterion_{n:02d}", marks=[pytest.mark.slow] if n in SLOW else []) for n in CHECKS],
)
def test_criterion(number, capsys):
    _report(number, capsys)


if __name__ == "__main__":
    failed = 0
    for n, check in CHECKS.items():
        res = check()
        print(res.line(), flush=True)
        failed += not res.passed
    sys.exit(1 if failed else 0)
