import math

import numpy as np
import pytest

from sglab.soliton import SolitonConfig


def corpus():
    """Named configurations shared by the module tests."""
    return {
        "kink": SolitonConfig.kink(0.0, 0.3),
        "saddle": SolitonConfig.saddle(),
        "four_end": SolitonConfig.four_end(0.8, 0.6),
        "asym4": SolitonConfig.from_angles(np.radians([20.0, -50.0]), [0.3, -0.2]),
        "spread6": SolitonConfig.from_angles(np.radians([10.0, 50.0, 90.0]), [0.2, -0.1, 0.3]),
    }


@pytest.fixture(scope="session")
def configs():
    return corpus()


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


def random_config(rng, n, spread=1.3):
    while True:
        th = rng.uniform(-spread, spread, n)
        d = np.abs(th[:, None] - th[None, :]) + np.eye(n)
        if d.min() > 0.05:
            return SolitonConfig.from_angles(th, rng.normal(scale=0.7, size=n))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
