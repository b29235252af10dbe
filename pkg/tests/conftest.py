import pytest

_CRITERIA: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line, then assert it."""

    def record(name: str, ok: bool, detail: str = "") -> None:
        line = f"{'PASS' if ok else 'FAIL'} {name}" + (f": {detail}" if detail else "")
        print(line)
        _CRITERIA.append((name, ok, detail))
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _CRITERIA:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}" + (f": {detail}" if detail else ""))
