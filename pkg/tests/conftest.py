import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import fixtures  # noqa: E402


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Touch every compiled kernel once so timing tests measure compute,
    not JIT-cache loading."""
    import peelkit as pk

    mesh = fixtures.icosphere(1, 1.0, (0, 0, 2.5))
    cam = fixtures.simple_camera(8)
    stack = pk.encode_peeled(mesh, cam, 2)
    cloud = pk.decode_pointcloud(stack)
    pk.point_to_surface(cloud, mesh)
    pk.occluded_body_faces(mesh, fixtures.icosphere(1, 1.2, (0, 0, 2.5)))


@pytest.fixture
def sphere_scene():
    """Unit sphere at z=2.5 with a 64x64 camera at the origin."""
    return fixtures.icosphere(4, 1.0, (0, 0, 2.5)), fixtures.simple_camera(64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
