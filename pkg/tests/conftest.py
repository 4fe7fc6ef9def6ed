import math

import pytest

from latticekernel.korobov_space import SpaceParams
from latticekernel.spectral import precision

WEIGHT_SCHEMES = ("poly3a", "poly2", "geo09", "equal")


@pytest.fixture
def high():
    """256-bit context used for P-criterion work."""
    return precision(256)


@pytest.fixture
def reference_params():
    """n=2 reference instance: d=1, alpha=1, gamma_1 = 1/pi^2."""
    return SpaceParams.create(1, "equal", 1)


@pytest.fixture
def space():
    def make(alpha=1, weights="poly3a", d=1):
        return SpaceParams.create(alpha, weights, d)
    return make


def relative_error(value, expected):
    return abs(float(value) - float(expected)) / abs(float(expected))


def box_sum(params, H):
    """prod_j (1 + 2 gamma_j sum_{h=1}^H h^(-2 alpha))."""
    total = 1.0
    for gamma in params.gammas():
        total *= 1 + 2 * gamma * math.fsum(h ** (-2.0 * params.alpha) for h in range(1, H + 1))
    return total
