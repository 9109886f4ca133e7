import itertools

import numpy as np
import pytest

from irsbeam.channel import PhaseVector, cn, combined_channel, default_links, generate, \
    single_user_geometry

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def iid_instance(seed, n, m=4):
    """Rayleigh (G, h_r, h_d) with unit-variance entries."""
    r = np.random.default_rng(seed)
    return cn(r, (n, m)), cn(r, n), cn(r, m)


def model_instance(seed, n, distance, m=4):
    """Single-user channels from the simulation model (user at (2, d, 0))."""
    return generate(single_user_geometry(m, n, distance), default_links(), 0, seed)


def enumerate_gain(g, h_r, h_d, bits):
    """Brute-force max of ||h_r^H Theta G + h_d^H||^2 over every level vector.

    Independent of the quadratic-form algebra used by the solvers.
    """
    n_levels = 1 << bits
    lv = np.array(list(itertools.product(range(n_levels), repeat=len(h_r))))
    u = np.exp(2j * np.pi * lv / n_levels)
    rows = (np.conj(h_r)[None, :] * u) @ g + np.conj(h_d)[None, :]
    vals = np.sum(np.abs(rows) ** 2, axis=1)
    i = int(np.argmax(vals))
    return float(vals[i]), PhaseVector(bits, lv[i])


def direct_gain(ch, theta, k=0):
    h = combined_channel(ch, theta, k)
    return float(np.real(np.vdot(h, h)))
