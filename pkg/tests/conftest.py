import numpy as np
import pytest

from molmagic import model


@pytest.fixture(scope="session")
def rbcs():
    return model.rbcs()


@pytest.fixture(scope="session")
def rbcs_bare(rbcs):
    """RbCs without the quadrupole coupling, for comparisons with closed forms."""
    return rbcs.without_hyperfine()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
