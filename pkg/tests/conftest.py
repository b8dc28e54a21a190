import pytest

from rleach.model import Protocol, ScenarioConfig, validate_config


@pytest.fixture
def table1():
    """Table-I scenario with the default protocol settings."""
    return validate_config(ScenarioConfig())


@pytest.fixture
def leach_cfg(table1):
    return table1.with_protocol(Protocol.LEACH)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
