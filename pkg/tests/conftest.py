import pytest

from fwportion import _backend

ACCEPTANCE_LINES = []


@pytest.fixture(params=_backend.available())
def backend(request):
    """Run the test once per available kernel backend."""
    before = _backend.name
    _backend.use(request.param)
    yield request.param
    _backend.use(before)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
