import pytest

_ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    def record(result):
        _ACCEPTANCE_LINES.append(result.line())
        print(result.line())
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
