import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def record_check():
    """Store a verify.Check so its PASS/FAIL line appears in the terminal summary."""

    def record(check):
        ACCEPTANCE_LINES.append(check.line())
        return check

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
        terminalreporter.write_line(line)
