import re

import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one acceptance line: report(criterion, passed, detail)."""
    def add(criterion, passed, detail):
        line = f"ACCEPTANCE {criterion:<16} {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        key = lambda s: (int(re.match(r"\d+", s.split()[1]).group()), s.split()[1])
        for line in sorted(ACCEPTANCE_LINES, key=key):
            terminalreporter.write_line(line)
