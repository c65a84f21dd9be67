"""Shared parameter sets and fixtures."""
import numpy as np
import pytest

from dispersive_jc.hilbert import SystemParams, TruncatedSpace


def appendix_params(eps_over_kappa=1.667, gamma=1.0):
    """Kerr reference set: dc/kappa=74.17, g/delta=0.14, 2kappa/gamma=12, g/(2kappa)=279."""
    kappa = 6.0 * gamma if gamma else 1.0
    g = 279 * 2 * kappa
    return SystemParams.from_dispersive(74.17 * kappa, g / 0.14, g, eps_over_kappa * kappa, kappa, gamma)


def fig1d_params():
    """delta/g=0.873, dc/kappa=9.167, g/gamma=600, 2kappa/gamma=12, eps/gamma=45."""
    return SystemParams.from_dispersive(9.167 * 6, 0.873 * 600, 600.0, 45.0, 6.0, 1.0)


def fig9_params(gamma=0.0, delta_c=56.833):
    """kappa=1, g/(2kappa)=279, eps/(2kappa)=100/12, g/delta=0.14."""
    g = 558.0
    return SystemParams.from_dispersive(delta_c, g / 0.14, g, 2 * 100 / 12, 1.0, gamma)


def fig2_params(delta_c_over_kappa=57.5):
    """gamma=1: eps/gamma=100, 2kappa/gamma=12, g/gamma=3347, g/delta=0.14."""
    return SystemParams.from_dispersive(delta_c_over_kappa * 6, 3347 / 0.14, 3347.0, 100.0, 6.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_space():
    return TruncatedSpace(6)


def random_density(rng, d, rank=None):
    rank = rank or d
    m = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    r = m @ m.conj().T
    return r / np.trace(r).real


def random_state(rng, d):
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
