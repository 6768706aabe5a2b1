import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

# three-mode reference example (decay rates and jump gains)
LAM = {1: 3.0, 2: 1.5, 3: 2.5}
MU = {(1, 2): 18.0, (2, 1): 2.3, (3, 1): 41.0, (1, 3): 13.0, (2, 3): 1.0, (3, 2): 17.0}
MU_MODE = {1: 18.0, 2: 2.3, 3: 41.0}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def example():
    from switchdwell import bundled_example
    return bundled_example()


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
