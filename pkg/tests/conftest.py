import numpy as np
import pytest

from vemfhn.kernels import BACKENDS
from vemfhn.mesh import (generate_distorted_quad_mesh, generate_square_mesh,
                         generate_voronoi_mesh)


@pytest.fixture(params=sorted(BACKENDS))
def backend(request):
    return request.param


@pytest.fixture(scope="session")
def voronoi64():
    return generate_voronoi_mesh(64, seed=3)


@pytest.fixture(scope="session")
def mesh_zoo():
    """One small mesh of each family."""
    return {
        "squares": generate_square_mesh(6),
        "distorted": generate_distorted_quad_mesh(6, 0.25, seed=1),
        "voronoi": generate_voronoi_mesh(36, seed=2),
    }


def random_polygon(rng, n=None, radius=1.0, center=(0.0, 0.0)):
    """Star-shaped CCW polygon with ``n`` vertices at random radii and angles."""
    n = n or int(rng.integers(3, 9))
    ang = np.sort(rng.uniform(0, 2 * np.pi, n))
    # keep angles apart so edges stay reasonably sized
    ang = np.sort((ang + np.linspace(0, 2 * np.pi, n, endpoint=False)) / 2)
    r = radius * rng.uniform(0.5, 1.0, n)
    return np.column_stack([center[0] + r * np.cos(ang), center[1] + r * np.sin(ang)])


# one "PASS/FAIL criterion k: ..." line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
