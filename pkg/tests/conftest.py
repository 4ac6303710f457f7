import pytest

CRITERIA = []


@pytest.fixture
def criterion():
    """Record a numbered acceptance check; the verdicts are listed at the end of the run."""

    def record(number, name, passed, detail=""):
        line = f"criterion {number:>2} [{'PASS' if passed else 'FAIL'}] {name}: {detail}"
        CRITERIA.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(CRITERIA, key=lambda item: item[0]):
        terminalreporter.write_line(line)
