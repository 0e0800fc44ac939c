import pytest

_LINES: dict[int, str] = {}


@pytest.fixture
def report(capsys):
    """Record one acceptance line and fail the test when the criterion is missed."""
    def emit(n: int, ok: bool, detail: str) -> None:
        line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        _LINES[n] = line
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
    return emit


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_LINES):
            terminalreporter.write_line(_LINES[n])
