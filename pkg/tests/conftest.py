import pytest

_RESULTS = {}


@pytest.fixture
def criterion():
    """Record one acceptance verdict; returns the verdict so tests can assert on it."""

    def record(number, title, passed, detail=""):
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        _RESULTS[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_RESULTS):
            terminalreporter.write_line(_RESULTS[number])
