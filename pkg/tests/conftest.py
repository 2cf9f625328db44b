import pytest

# One line per acceptance criterion, replayed after the run so they survive
# output capture.  Each acceptance test emits its line before asserting, so
# a failed criterion still reports FAIL here.
_criterion_lines = []


@pytest.fixture
def criterion_line():
    def emit(text: str) -> None:
        _criterion_lines.append(text)

    return emit


def pytest_terminal_summary(terminalreporter):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in _criterion_lines:
            terminalreporter.line(line)
