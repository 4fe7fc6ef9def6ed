import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from latticekernel.korobov_space import (
    SUPPORTED_ORDERS,
    ProductWeights,
    SpaceParams,
    UnsupportedOrderError,
    bernoulli_periodic,
    decay_r,
    kernel_diagonal,
    kernel_eval,
    kernel_sections,
    omega,
    support,
    zeta_even,
)
from latticekernel.spectral import NATIVE


@pytest.mark.parametrize("q, x, expected", [
    (2, 0, Fraction(1, 6)),
    (2, 0.5, Fraction(-1, 12)),
    (4, 0, Fraction(-1, 30)),
    (4, 0.5, Fraction(7, 240)),
])
def test_bernoulli_values(q, x, expected):
    assert bernoulli_periodic(q, x) == pytest.approx(float(expected), abs=1e-15)


def test_bernoulli_extended_precision(high):
    value = bernoulli_periodic(4, high.fraction(1, 2), high)
    assert abs(value - high.convert(Fraction(7, 240))) < high.tolerance()


@pytest.mark.parametrize("q", [0, 3, 14])
def test_bernoulli_unsupported_order(q):
    with pytest.raises(UnsupportedOrderError):
        bernoulli_periodic(q, 0.25)


@pytest.mark.parametrize("q", SUPPORTED_ORDERS)
def test_bernoulli_integrates_to_zero(q):
    nodes, weights = np.polynomial.legendre.leggauss(16)
    x = (nodes + 1) / 2
    assert abs(np.dot(weights / 2, bernoulli_periodic(q, x))) <= 1e-12


@pytest.mark.parametrize("q", SUPPORTED_ORDERS)
def test_bernoulli_reflection(q):
    x = np.linspace(0.01, 0.99, 17)
    assert np.allclose(bernoulli_periodic(q, x), bernoulli_periodic(q, 1 - x), rtol=0, atol=1e-13)


@pytest.mark.parametrize("q, expected", [
    (2, math.pi ** 2 / 6),
    (4, math.pi ** 4 / 90),
    (6, math.pi ** 6 / 945),
    (8, math.pi ** 8 / 9450),
])
def test_zeta_even(q, expected):
    assert zeta_even(q) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("q", SUPPORTED_ORDERS)
def test_zeta_even_matches_mpmath(q, high):
    assert abs(zeta_even(q, high) - high.mp.zeta(q)) < high.tolerance()


def test_zeta_unsupported():
    with pytest.raises(UnsupportedOrderError):
        zeta_even(16)


@pytest.mark.parametrize("alpha, x, expected", [
    (1, 0, math.pi ** 2 / 3),
    (1, 0.5, -math.pi ** 2 / 6),
    (2, 0, 2 * math.pi ** 4 / 45),
])
def test_omega(alpha, x, expected):
    assert omega(alpha, x) == pytest.approx(expected, rel=1e-14)


def test_omega_at_zero_is_twice_zeta():
    for alpha in (1, 2, 3):
        assert omega(alpha, 0) == pytest.approx(2 * zeta_even(2 * alpha), rel=1e-13)


def test_truncated_series_agreement():
    params = SpaceParams.create(1, "equal", 1)
    gamma = params.gamma(1)
    H = 10 ** 4
    h = np.arange(1, H + 1)
    for x in (0.0, 0.1, 0.37, 0.5, 0.9):
        series = 1 + 2 * gamma * np.sum(np.cos(2 * np.pi * h * x) / h ** 2)
        assert abs(kernel_eval(params, [x], [0.0]) - series) <= 1e-3


def test_kernel_eval_reference(reference_params):
    assert kernel_eval(reference_params, [0.3], [0.3]) == pytest.approx(4 / 3, rel=1e-14)


def test_kernel_eval_two_dimensions():
    params = SpaceParams.create(1, "equal", 2)
    assert kernel_eval(params, [0, 0], [0.5, 0.5]) == pytest.approx(25 / 36, rel=1e-14)


def test_kernel_eval_dimension_mismatch():
    params = SpaceParams.create(1, "equal", 2)
    with pytest.raises(ValueError):
        kernel_eval(params, [0.1], [0.2, 0.3])


@given(
    st.lists(st.floats(0, 1), min_size=3, max_size=3),
    st.lists(st.floats(0, 1), min_size=3, max_size=3),
    st.sampled_from(["poly3a", "poly2", "geo09", "equal"]),
)
def test_kernel_symmetry(x, y, weights):
    params = SpaceParams.create(2, weights, 3)
    assert kernel_eval(params, x, y) == pytest.approx(kernel_eval(params, y, x), rel=1e-12)


def test_kernel_depends_on_difference_only():
    params = SpaceParams.create(1, "poly2", 2)
    x, y = [0.7, 0.2], [0.4, 0.9]
    difference = [(a - b) % 1 for a, b in zip(x, y)]
    assert kernel_eval(params, x, y) == pytest.approx(kernel_eval(params, difference, [0, 0]), rel=1e-12)


def test_kernel_diagonal():
    assert kernel_diagonal(SpaceParams.create(1, "equal", 1)) == pytest.approx(4 / 3, rel=1e-14)
    assert kernel_diagonal(SpaceParams.create(1, "equal", 2)) == pytest.approx(16 / 9, rel=1e-14)


@pytest.mark.parametrize("alpha", [1, 2, 3])
def test_kernel_diagonal_matches_kernel_eval(alpha):
    params = SpaceParams.create(alpha, "geo09", 5)
    y = np.random.default_rng(alpha).random(5)
    assert kernel_diagonal(params) == pytest.approx(kernel_eval(params, y, y), rel=1e-13)


def test_kernel_sections_matches_kernel_eval():
    params = SpaceParams.create(2, "poly3a", 3)
    rng = np.random.default_rng(7)
    nodes = rng.random((5, 3))
    points = rng.random((4, 3))
    sections = kernel_sections(params, nodes, points)
    assert sections.shape == (4, 5)
    for i, y in enumerate(points):
        for k, t in enumerate(nodes):
            assert sections[i, k] == pytest.approx(kernel_eval(params, t, y), rel=1e-12)


def test_decay_r():
    assert decay_r(SpaceParams.create(1, "equal", 2), (0, 0)) == 1
    assert decay_r(SpaceParams.create(1, "equal", 2), (2, 0)) == pytest.approx(4 * math.pi ** 2, rel=1e-14)
    assert decay_r(SpaceParams.create(2, "equal", 2), (1, -3)) == pytest.approx(81 * math.pi ** 8, rel=1e-13)


@given(st.lists(st.integers(-50, 50), min_size=3, max_size=3))
def test_decay_r_even(h):
    params = SpaceParams.create(1, "poly3a", 3)
    assert decay_r(params, h) == decay_r(params, [-hj for hj in h])


def test_support():
    assert support((0, 3, 0, -1)) == (1, 3)


def test_weight_schemes(high):
    pi2 = math.pi ** 2
    assert ProductWeights.from_name("poly3a").gamma(2, 1) == pytest.approx(1 / (8 * pi2))
    assert ProductWeights.from_name("poly2").gamma(3, 1) == pytest.approx(1 / (9 * pi2))
    assert ProductWeights.from_name("geo09").gamma(3, 1) == pytest.approx(0.81 / pi2)
    assert ProductWeights.from_name("equal").gamma(7, 2) == pytest.approx(1 / pi2 ** 2)
    gamma = ProductWeights.from_name("poly3a").gamma(2, 2, high)
    assert abs(gamma - 1 / (64 * high.pi ** 4)) < high.tolerance()


def test_explicit_weights():
    weights = ProductWeights.from_name("list:1, 0.5,1/4")
    assert weights.name == "list:1,1/2,1/4"
    assert weights.gamma(3, 1) == 0.25
    assert ProductWeights.explicit([1, 0]).gamma(2, 1, NATIVE) == 0


def test_zero_weight_decay_is_infinite():
    params = SpaceParams.create(1, "list:1,0", 2)
    assert decay_r(params, (1, 0)) == 1
    assert math.isinf(decay_r(params, (1, 1)))


@pytest.mark.parametrize("name", ["poly4", "list", "list:", "list:1,-1", "list:a"])
def test_invalid_weights(name):
    with pytest.raises(ValueError):
        ProductWeights.from_name(name)


def test_space_params_validation():
    with pytest.raises(ValueError):
        SpaceParams.create(0, "equal", 1)
    with pytest.raises(ValueError):
        SpaceParams.create(1, "equal", 0)
    with pytest.raises(ValueError):
        SpaceParams.create(1, "list:1,1", 3)
    assert SpaceParams.create(1, "list:1,1", 3 - 1).with_dimension(1).d == 1
