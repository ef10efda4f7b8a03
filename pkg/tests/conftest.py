import pytest

# (criterion, passed, detail) lines collected by the acceptance suite
ACCEPTANCE = []


@pytest.fixture
def record():
    def _record(criterion: str, passed: bool, detail: str = "") -> bool:
        line = f"{'PASS' if passed else 'FAIL'}  criterion {criterion}: {detail}"
        ACCEPTANCE.append(line)
        print(line)
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
