import pytest

_VERDICTS = []


@pytest.fixture
def verdict():
    """Print and remember one PASS/FAIL line; returns the boolean so tests can assert on it."""

    def record(number, name, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number} ({name}): {detail}"
        print(line)
        _VERDICTS.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
