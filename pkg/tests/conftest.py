import numpy as np
import pytest

from dynct.harness import ExperimentConfig, Problem, build_problem, default_config
from dynct.radon import GeometrySpec


@pytest.fixture(scope="session")
def intensity_problem() -> Problem:
    """Full-size intensity problem (20 frames, 41 -> 33 px, 7 x 40 data)."""
    return build_problem(default_config("intensity"))


@pytest.fixture(scope="session")
def small_problem() -> Problem:
    """Cheap problem for solver unit tests."""
    cfg = default_config("intensity")
    cfg.n_frames = 4
    cfg.generation_resolution = 25
    cfg.reconstruction_resolution = 21
    cfg.n_angles_per_step = 5
    cfg.n_offsets = 24
    return build_problem(cfg)


@pytest.fixture(scope="session")
def small_geometry() -> GeometrySpec:
    return GeometrySpec(n_offsets=24, n_angles_per_step=5, n_time_steps=4)


class IdentityOp:
    """Operator stub: forward and adjoint are the identity, unit weights."""

    class _Geom:
        T = 1.0

    def __init__(self, shape):
        self.image_shape = shape
        self.data_shape = shape
        self.geometry = self._Geom()
        self.time_weights = np.full(shape[0], 1.0 / shape[0])
        self.pixel_area = 1.0

    def data_weights(self, s=None):
        return np.asarray(1.0)

    def image_weights(self):
        return np.asarray(1.0)

    def forward(self, x):
        return np.array(x, dtype=float, copy=True)

    def adjoint(self, g, s=None):
        return np.array(g, dtype=float, copy=True)


@pytest.fixture
def identity_op():
    return IdentityOp((4, 7, 7))
