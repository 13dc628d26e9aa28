import numpy as np
import pytest

from qpg.harness.randoms import rng_for

SEED = 20250809


@pytest.fixture
def rng():
    return rng_for(SEED, 0)


def rng_at(index: int) -> np.random.Generator:
    return rng_for(SEED, index)
