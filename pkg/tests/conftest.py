import numpy as np
import pytest

from pshlab.catalog import get_domain
from pshlab.exhaustion import build_exhaustion


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def ball():
    return get_domain("ball")


@pytest.fixture(scope="session")
def cone():
    return get_domain("cone")


@pytest.fixture(scope="session")
def loglip():
    return get_domain("loglip")


@pytest.fixture(scope="session")
def loglip_exhaustion(loglip):
    return build_exhaustion(loglip, rng=np.random.default_rng(0))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if "lines" in RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS["lines"]:
            terminalreporter.write_line(line)
