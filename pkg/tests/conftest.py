import sys

import pytest

from bipolar_hardy.config import default_config


@pytest.fixture(scope="session")
def desk():
    return default_config(4, 3.0)


@pytest.fixture(scope="session")
def linear():
    return default_config(3, 2.0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "CRITERIA", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
