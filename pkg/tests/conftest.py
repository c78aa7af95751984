import pytest

ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture
def report(request):
    """Print a criterion line and keep it for the terminal summary."""

    def emit(line: str) -> None:
        print(line)
        request.config.stash.setdefault(ACCEPTANCE_LINES, []).append(line)

    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
