import numpy as np
import pytest

from sandflow.mesh import build_edge_topology, generate_disk_mesh, generate_square_mesh


@pytest.fixture(scope="session")
def square_2x2():
    return generate_square_mesh(-1.0, 1.0, -1.0, 1.0, 1.0)


@pytest.fixture(scope="session")
def unit_square_fine():
    return generate_square_mesh(0.0, 1.0, 0.0, 1.0, 0.125)


@pytest.fixture(scope="session")
def disk_coarse():
    return generate_disk_mesh(1.0, 0.2)


@pytest.fixture(scope="session")
def disk_coarse_topo(disk_coarse):
    return build_edge_topology(disk_coarse)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)


def single_triangle_mesh():
    """Unit right triangle (0,0), (1,0), (0,1)."""
    from sandflow.mesh import TriMesh

    return TriMesh(
        np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
        np.array([[0, 1, 2]]),
    )


def two_triangle_mesh():
    """Unit square split along the diagonal."""
    from sandflow.mesh import TriMesh

    return TriMesh(
        np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
        np.array([[0, 1, 2], [0, 2, 3]]),
    )
