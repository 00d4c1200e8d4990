import numpy as np
import pytest

from accspec.lattice_geom import Lattice2
from accspec.window_kernel import Window, canonical_tight_window


@pytest.fixture(scope="session")
def half_lattice():
    return Lattice2.diag(0.5, 0.5)


@pytest.fixture(scope="session")
def gauss():
    return Window.gaussian()


@pytest.fixture(scope="session")
def tight_window(half_lattice, gauss):
    return canonical_tight_window(gauss, half_lattice, 6.0, 1024, 8.0)


def shifted_window_values(w, z, t):
    """pi(x, w) g sampled on t, built from the convention directly."""
    x, om = z
    return np.exp(2j * np.pi * om * t) * w.evaluate(t - x)


def quad_inner(f, g, h):
    return complex(np.sum(f * np.conj(g)) * h)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
