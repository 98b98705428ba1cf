import numpy as np
import pytest

from isocg import bundled_sampleset


@pytest.fixture(scope="session")
def bundled_data():
    """Bundled reference sample set (loaded once per session)."""
    return bundled_sampleset()


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)
