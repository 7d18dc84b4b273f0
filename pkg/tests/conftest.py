import numpy as np
import pytest

from rdlab.dgp import Dgp, PiecewisePolyCef, sample_dataset
from rdlab.rng import rng_from
from rdlab.synthetic import example_dgp


@pytest.fixture(scope="session")
def curved_dgp():
    return example_dgp("curved", n=1500, seed=3)


@pytest.fixture(scope="session")
def linear_dgp():
    return example_dgp("linear", n=1500, seed=4)


@pytest.fixture(scope="session")
def flat_dgp():
    return example_dgp("flat", n=1200, seed=5)


@pytest.fixture(scope="session")
def curved_dataset(curved_dgp):
    return sample_dataset(curved_dgp, 0.324, seed=7)


def quad_dgp(c2: float = 20.0, n: int = 500, sigma: float = 1.0, seed: int = 5) -> Dgp:
    """Pure quadratic arms with opposite curvature; exact truth for
    curvature-sensitive checks."""
    pool = rng_from(seed, "pool").uniform(-0.99, 0.99, size=n)
    left = np.array([2.0, 0.8, c2, 0.0, 0.0, 0.0])
    right = np.array([2.0, -0.5, -c2, 0.0, 0.0, 0.0])
    return Dgp(
        x_pool=pool,
        cef=PiecewisePolyCef(left, right),
        sigma=sigma,
        n=n,
        noise_model="homoskedastic",
        alpha_left=2.0,
        alpha_right=2.0,
        provenance={"source": "test:quad"},
    )
