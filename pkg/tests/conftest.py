import pytest

_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one acceptance line; returns ``ok`` so tests can ``assert`` it."""

    def record(tag, ok, detail=""):
        line = f"criterion {tag:<3} {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
