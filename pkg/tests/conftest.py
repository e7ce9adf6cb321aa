"""Shared fixtures and the acceptance summary printed at the end of a run."""
import pytest

from critomech.params import load_preset

ACCEPTANCE_LINES: dict[int, str] = {}


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"ACCEPTANCE {number:2d} {'PASS' if passed else 'FAIL'}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])


@pytest.fixture(scope="session")
def fig2():
    return load_preset("fig2")


@pytest.fixture(scope="session")
def fig3():
    return load_preset("fig3")


@pytest.fixture(scope="session")
def fig4():
    return load_preset("fig4")
