from __future__ import annotations

import pytest

from syslab.harness import sweep

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


@pytest.fixture(scope="session")
def default_sweep():
    """The j in {2, 4, 8, 16} sweep at default resolution, shared across modules."""
    return sweep([2.0, 4.0, 8.0, 16.0])


@pytest.fixture(scope="session")
def small_sweep():
    return sweep([1.0, 2.0, 3.0])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
