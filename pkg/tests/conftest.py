import numpy as np
import pytest

from sdpsketch.instances import four_double_zero_polynomial
from sdpsketch.polynomial import Polynomial


@pytest.fixture(scope="session")
def product_poly() -> Polynomial:
    return four_double_zero_polynomial()


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
