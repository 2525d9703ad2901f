from pathlib import Path

import pytest

# (criterion number, passed, one-line detail) collected by the acceptance suite
ACCEPTANCE_LINES: list[tuple[int, bool, str]] = []


@pytest.fixture(scope="session")
def repo_root() -> Path:
    return Path(__file__).resolve().parents[1]


@pytest.fixture
def record():
    """Record one acceptance verdict; printed now and again in the terminal summary."""

    def _record(number: int, passed: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append((number, passed, detail))
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'} - {detail}")
