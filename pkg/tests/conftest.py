import sys

import numpy as np
import pytest

from locdens.model import make_model
from locdens.population import make_oracle


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def normal():
    return make_oracle("normal", (0.0, 1.0))


@pytest.fixture(scope="session")
def mixture():
    return make_oracle("mixture", (0.4, -1.0, 0.5, 0.6, 1.0, 0.8))


@pytest.fixture
def quadratic_1d():
    return make_model(0.0, 0.5, 3)


def pytest_terminal_summary(terminalreporter):
    # one line per acceptance criterion, collected by test_acceptance.py
    mod = sys.modules.get("test_acceptance")
    RESULTS = getattr(mod, "RESULTS", None)
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS):
        ok, label = RESULTS[key]
        terminalreporter.write_line(f"criterion {key:2d} [{'PASS' if ok else 'FAIL'}] {label}")
