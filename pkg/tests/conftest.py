import numpy as np
import pytest
from hypothesis import settings

from chordmink.polytope import HalfspaceSpec, cube_normals, wulff_shape

settings.register_profile("default", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("default")


@pytest.fixture
def square():
    """[-1, 1]^2."""
    return wulff_shape(HalfspaceSpec(cube_normals(2), np.ones(4)))


@pytest.fixture
def unit_square():
    """[0, 1]^2."""
    return wulff_shape(HalfspaceSpec(cube_normals(2), np.array([1.0, 1.0, 0.0, 0.0])))


@pytest.fixture
def cube():
    """[-1, 1]^3."""
    return wulff_shape(HalfspaceSpec(cube_normals(3), np.ones(6)))


def random_rotation(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))
