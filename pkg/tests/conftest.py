import hypothesis
import numpy as np
import pytest

from tetray.mesh import Centering, TetMesh, generate_synthetic
from tetray.partitions import KdBuildConfig
from tetray.render import AdaptiveParams, Camera
from tetray.scene import Scene
from tetray.transfer import TransferFunction

# numba-jitted paths pay a one-off compile cost; never let it fail a deadline
hypothesis.settings.register_profile(
    "tetray", deadline=None, max_examples=25,
    suppress_health_check=[hypothesis.HealthCheck.too_slow])
hypothesis.settings.load_profile("tetray")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def banded_tf(domain=(0.0, 3.5)) -> TransferFunction:
    return TransferFunction(domain, np.array([
        [0.0, 0.0, 1.0, 0.00],
        [0.0, 1.0, 1.0, 0.10],
        [0.0, 1.0, 0.0, 0.50],
        [1.0, 1.0, 0.0, 0.30],
        [1.0, 0.0, 0.0, 0.80],
    ]))


@pytest.fixture(scope="session")
def radial_scene():
    mesh = generate_synthetic(4, "radial", Centering.VERTEX)
    return Scene.build(mesh, banded_tf(), kd_config=KdBuildConfig(40))


@pytest.fixture(scope="session")
def radial_camera():
    return Camera(position=[10.0, 6.0, 8.0], look_at=[2.0, 2.0, 2.0],
                  up=[0.0, 1.0, 0.0], fov_y_deg=40.0, width=48, height=48)


@pytest.fixture(scope="session")
def default_params():
    return AdaptiveParams(s1=0.05, s2=0.3, p=2.0)


def constant_mesh(n=2, value=0.5, centering=Centering.VERTEX) -> TetMesh:
    m = generate_synthetic(n, "ramp", centering)
    return TetMesh(m.vertices, m.tets, np.full(len(m.field), value), centering)


@pytest.fixture(scope="session")
def constant_scene():
    tf = TransferFunction.constant([0.9, 0.7, 0.2, 0.35], domain=(0.0, 1.0))
    return Scene.build(constant_mesh(2, 0.5), tf, kd_config=KdBuildConfig(8))
