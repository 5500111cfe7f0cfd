import numpy as np
import pytest

from pointsplit.measure import DensityIntensity, DiscreteIntensity, Window


@pytest.fixture
def unit_square():
    return Window.unit(2)


@pytest.fixture
def rho2(unit_square):
    return DensityIntensity.constant(unit_square, 2.0)


@pytest.fixture
def weights2():
    return DiscreteIntensity([0.5, 1.0])


@pytest.fixture
def gen():
    return np.random.default_rng(20240601)
