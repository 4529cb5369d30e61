import sys
import warnings

import numpy as np
import pytest

from singular_sl.potentials import PotentialSpec, realize


@pytest.fixture(scope="session")
def rough_sigma():
    """A fixed rough real potential on the default grid."""
    return realize(PotentialSpec.fourier_random(0.5, 256, 7), 2048)


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "ACCEPTANCE_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
