from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from lorfv.flux import LaxFriedrichs
from lorfv.geometry import burgers, flrw_compatible, flrw_linear, minkowski
from lorfv.mesh import build_uniform
from lorfv.scheme import march, riemann_data

settings.register_profile("lorfv", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("lorfv")

# lines recorded by the acceptance module, echoed in the terminal summary
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def flat():
    return minkowski()


@pytest.fixture(scope="session")
def four_cells():
    """Periodic Minkowski mesh with 4 cells of width 0.25 and one layer of 0.1."""
    return build_uniform(minkowski(), 4, 1, 0.1)


@pytest.fixture(scope="session")
def shock_tube():
    """Burgers shock tube: Nx=64, 128 layers up to T=0.5 (CFL ratio 0.5)."""
    m = build_uniform(minkowski(), 64, 128, 0.5)
    f = burgers()
    q = LaxFriedrichs(m, f)
    return march(m, f, q, riemann_data(1.0, 0.0, 0.5))


@pytest.fixture(scope="session")
def flrw_mesh():
    return build_uniform(flrw_linear(), 32, 40, 0.5)


@pytest.fixture(scope="session")
def flrw_flux():
    return flrw_compatible(flrw_linear())


def right_incidence(mesh, k=0):
    """Lateral incidence of element ``k`` whose reference normal points to +x."""
    inc = np.flatnonzero((mesh.lat_elem == k) & (mesh.lat_sign > 0))
    return int(inc[0])


def left_incidence(mesh, k=0):
    inc = np.flatnonzero((mesh.lat_elem == k) & (mesh.lat_sign < 0))
    return int(inc[0])
