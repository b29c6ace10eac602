import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_report():
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""

    def record(label: str, passed: bool, detail: str = ""):
        ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {label}{'  ' + detail if detail else ''}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
