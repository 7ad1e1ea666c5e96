import numpy as np
import pytest

from curtainmodel import (AnnulusCover, Euclidean, Glued, HalfPlane, Product)


@pytest.fixture(scope="session")
def spaces():
    """The example backends exercised throughout the suite."""
    h = HalfPlane()
    return {
        "euclidean2": Euclidean(2),
        "half_plane": h,
        "product": Product(HalfPlane(), Euclidean(1)),
        "glued": Glued([HalfPlane(), Euclidean(2)],
                       [[complex(0.0, 1.0)], [[0.0, 0.0]]]),
        "annulus": AnnulusCover(True),
        "annulus_incomplete": AnnulusCover(False),
    }


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def sample_pair(space, rng, scale=3.0, min_distance=0.0, max_tries=200):
    for _ in range(max_tries):
        x = space.sample_point(rng, scale)
        y = space.sample_point(rng, scale)
        if space.distance(x, y) > min_distance:
            return x, y
    raise RuntimeError("could not sample a pair")
