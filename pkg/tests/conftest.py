import pytest

_VERDICTS = []


@pytest.fixture
def verdict(request):
    """Record one acceptance line: ``verdict(ok, "detail")``."""

    def record(ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {request.node.name}: {detail}"
        _VERDICTS.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
