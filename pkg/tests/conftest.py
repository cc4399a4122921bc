import numpy as np
import pytest

from pstokes.mesh import build_square_mesh
from pstokes.spaces import build_fe_system


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def fe_cache():
    cache = {}

    def get(n, mode="strong"):
        key = (n, mode)
        if key not in cache:
            cache[key] = build_fe_system(build_square_mesh(n), mode)
        return cache[key]

    return get
