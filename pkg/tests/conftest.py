import pytest

_CRITERIA: dict[str, str] = {}


@pytest.fixture()
def criterion():
    """Record one acceptance line: ``criterion(name, passed, detail)``."""

    def record(name: str, passed: bool, detail: str) -> bool:
        line = f"{'PASS' if passed else 'FAIL'}  {name}: {detail}"
        _CRITERIA[name] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA, key=lambda n: int(n.split()[1]) if n.split()[1].isdigit() else 99):
        terminalreporter.write_line(_CRITERIA[name])
