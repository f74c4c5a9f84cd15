import pytest

_LINES = []


@pytest.fixture
def criterion():
    """Record one verdict line per acceptance criterion."""

    def record(number, ok, detail=""):
        _LINES.append((number, ok, detail))
        print(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(_LINES):
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
