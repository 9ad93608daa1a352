import numpy as np
import pytest

from mlqmc.pde import BasisCache


@pytest.fixture(scope="session")
def basis_cache():
    """One cache for the whole run; KL bases are deterministic in their key."""
    return BasisCache()


@pytest.fixture(scope="session")
def rng_factory():
    def make(seed):
        return np.random.default_rng(seed)
    return make
