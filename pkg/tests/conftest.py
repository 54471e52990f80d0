"""Shared fixtures: 1+1 quadratures and small registered contexts."""

import numpy as np
import pytest

from smearfield.freefield import FieldContext, MassShellQuadrature
from smearfield.testfn import GaussianPacket, Grid, smooth_bump

M = 1.0


def node_bump(center, halfwidths, spacing=0.025, amp=1.0):
    """Bump on a grid aligned with multiples of ``spacing``."""
    c = np.asarray(center, float)
    w = np.asarray(halfwidths, float)
    grid = Grid.covering(c - w, c + w, spacing)
    return smooth_bump(grid, c, w, amp=amp)


@pytest.fixture(scope="session")
def quad_packets():
    return MassShellQuadrature.gauss_legendre(M, 1, 10.0, nodes=512)


@pytest.fixture(scope="session")
def quad_bumps():
    return MassShellQuadrature.gauss_legendre(M, 1, 40.0, nodes=1280)


@pytest.fixture()
def packet_ctx(quad_packets):
    """Three 1+1 packets registered as ``a``, ``b`` and ``c``."""
    ctx = FieldContext(quad_packets, method="closed")
    ctx.register("a", GaussianPacket.from_momentum([0.3], 0.7, M, center=[0.0, 0.2]))
    ctx.register("b", GaussianPacket.from_momentum([-0.5], 0.9, M, center=[0.4, -0.3], amp=0.8 + 0.3j))
    ctx.register("c", GaussianPacket.from_momentum([0.1], 0.6, M, center=[-0.2, 0.5], amp=1j))
    return ctx


@pytest.fixture()
def rng():
    return np.random.default_rng(20240611)


# acceptance lines collected by tests/test_acceptance.py, echoed after the run
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
