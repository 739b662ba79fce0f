import pytest

from instances import scalar_instance

ACCEPTANCE_LINES = []


@pytest.fixture
def scalar():
    return scalar_instance()


@pytest.fixture
def report():
    def _report(criterion, ok, detail=""):
        line = f"ACCEPTANCE {criterion:>2} {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
