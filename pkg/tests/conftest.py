"""Shared fixtures: the baseline non-resonant system and the degenerate pair"""

import math

import pytest

from oamsim.params import DimensionlessParams

LN2 = math.log(2.0)


@pytest.fixture
def baseline_params():
    return DimensionlessParams.exact("1/2", "1/3", theta=LN2, phi=0.0)


@pytest.fixture
def degenerate_params():
    return DimensionlessParams.exact(24, 1, theta=LN2, phi=0.7)


@pytest.fixture
def squares_params():
    """xi = 1, eta = 0: resonances at the perfect squares"""
    return DimensionlessParams.exact(1, 0, theta=LN2)
