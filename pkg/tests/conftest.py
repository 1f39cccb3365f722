import pytest

_ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record a one-line PASS/FAIL verdict for the acceptance summary."""

    def record(criterion, passed, detail):
        verdict = "INFO" if passed is None else ("PASS" if passed else "FAIL")
        line = f"{verdict}  criterion {criterion}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in _ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
