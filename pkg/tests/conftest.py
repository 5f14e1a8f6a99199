import numpy as np
import pytest

from midori_cpa.cipher import MasterKey

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def key():
    return MasterKey.from_hex("687DED3B3C85B3F35B1009863E2A8CBF")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
