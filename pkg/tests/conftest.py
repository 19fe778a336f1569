"""Pytest wiring: acceptance summary lines printed after the run."""

import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    """Collect one pass/fail line per acceptance criterion.

    Usage: record_criterion(number, ok, detail). The line is printed in the
    terminal summary regardless of capture settings, and the calling test
    still fails through a normal assert.
    """

    def _record(number, ok, detail):
        verdict = "PASS" if ok else "FAIL"
        ACCEPTANCE_LINES.append((number, f"criterion {number:2d}: {verdict}  {detail}"))
        assert ok, f"criterion {number} failed: {detail}"

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
