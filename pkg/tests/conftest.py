"""Shared oracles.

Reference constants are computed here from their scalar equations with
closed forms or ``scipy.optimize.brentq``; nothing below calls the package's
own root finders.
"""

import numpy as np
import pytest
from scipy.optimize import brentq

ACCEPTANCE_LINES: list[str] = []


def scalar_root(beta: float, mu: float, a_c: float = 1.0) -> float:
    """Root of ``beta * (1 - exp(-(alpha + mu) a_c)) / (alpha + mu) = 1``."""

    def g(alpha):
        s = alpha + mu
        if abs(s) < 1e-12:
            return beta * a_c - 1.0
        return beta * -np.expm1(-s * a_c) / s - 1.0

    return brentq(g, -mu - 40.0, 40.0, xtol=1e-14)


@pytest.fixture(scope="session")
def s_star():
    return brentq(lambda s: 3.0 * (1.0 - np.exp(-s)) - s, 1.0, 3.0, xtol=1e-15)


@pytest.fixture(scope="session")
def alpha_star(s_star):
    return s_star - 1.0


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
