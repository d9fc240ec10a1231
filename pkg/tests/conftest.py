from __future__ import annotations

import sys
import warnings

import numpy as np
import pytest

from relufim.errors import HypothesisWarning
from relufim.features import generate_weights


@pytest.fixture(autouse=True)
def _quiet_hypothesis_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HypothesisWarning)
        yield


@pytest.fixture(scope="session")
def fm_small():
    return generate_weights(6, 200, seed=11)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
