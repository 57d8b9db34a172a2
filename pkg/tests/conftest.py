import numpy as np
import pytest

from trionwg import load_profile


@pytest.fixture(scope="session")
def profile():
    return load_profile("paper-2017")


@pytest.fixture()
def params(profile):
    return profile[0]


@pytest.fixture()
def device(profile):
    return profile[1]


@pytest.fixture()
def rng():
    return np.random.default_rng(42)
