import pytest

from gpata.privacy import LocationHierarchy

from helpers import ACCEPTANCE, SMALL_CITIES


@pytest.fixture
def hierarchy():
    return LocationHierarchy(SMALL_CITIES)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
