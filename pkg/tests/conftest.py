import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from platekit.mesh import triangle_geometry

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

REFERENCE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


@pytest.fixture
def reference_geom():
    return triangle_geometry(REFERENCE)


def random_triangle(rng, min_quality=0.05):
    """Counter-clockwise triangle with bounded aspect ratio at a random position and size."""
    while True:
        v = rng.uniform(-1.0, 1.0, size=(3, 2)) * rng.uniform(0.05, 3.0) + rng.uniform(-5, 5, size=2)
        e1, e2 = v[1] - v[0], v[2] - v[0]
        area2 = e1[0] * e2[1] - e1[1] * e2[0]
        if area2 < 0:
            v = v[[0, 2, 1]]
            area2 = -area2
        longest = max(np.sum((v[i] - v[j]) ** 2) for i, j in ((0, 1), (1, 2), (2, 0)))
        if area2 / longest > min_quality:
            return v


def random_signs(rng):
    return rng.choice([-1, 1], size=3)
