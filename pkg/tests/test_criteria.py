import math
import threading
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import WEIGHT_SCHEMES, box_sum, relative_error
from latticekernel.criteria import (
    Budget,
    BudgetExceededError,
    PrecisionFailureError,
    UnsupportedWeightsError,
    _clamp,
    k_entry,
    kernel_column,
    m_column,
    m_entry,
    p_integral_oracle,
    p_oracle_dense,
    p_star,
    p_star_squared,
    power_pointwise,
    power_squared_batch,
    s_oracle,
    s_quantity,
    s_star,
    s_star_from_quantity,
)
from latticekernel.korobov_space import SpaceParams, kernel_diagonal
from latticekernel.lattice import GeneratingVector, lattice_points, units
from latticekernel.spectral import NATIVE, SingularOperatorError, ratio_trace

REFERENCE = GeneratingVector(2, (1,))


def spread_vector(n, d):
    """Fixed vector stepping through the units of n three at a time."""
    candidates = units(n)
    return GeneratingVector(n, tuple(candidates[(3 * j) % len(candidates)] for j in range(d)))


# ---------------------------------------------------------
# Reference instance n=2, d=1, alpha=1, gamma_1 = 1/pi^2
# ---------------------------------------------------------


def test_reference_s_quantity(reference_params, high):
    assert s_quantity(REFERENCE, reference_params) == pytest.approx(77 / 360, rel=1e-13)
    value = s_quantity(REFERENCE, reference_params, high)
    assert abs(value - high.convert(Fraction(77, 360))) < high.tolerance()


def test_reference_s_star(reference_params):
    result = s_star(REFERENCE, reference_params)
    assert float(result) == pytest.approx(math.sqrt(2) * (77 / 360) ** 0.25, rel=1e-13)
    assert float(result) == pytest.approx(0.96175, abs=1e-5)
    assert (result.kind, result.n, result.d, result.alpha, result.weights, result.precision_bits) == (
        "S", 2, 1, 1, "equal", 53
    )


def test_s_star_from_quantity():
    assert s_star_from_quantity(0.25) == pytest.approx(1.0, rel=1e-15)
    assert s_star_from_quantity(0.0) == 0


def test_reference_columns(reference_params, high):
    expected_k = [Fraction(4, 3), Fraction(5, 6)]
    expected_m = [Fraction(46, 45), Fraction(353, 360)]
    for value, expected in zip(kernel_column(REFERENCE, reference_params, high), expected_k):
        assert abs(value - high.convert(expected)) < high.tolerance()
    for value, expected in zip(m_column(REFERENCE, reference_params, high), expected_m):
        assert abs(value - high.convert(expected)) < high.tolerance()
    assert k_entry(reference_params, REFERENCE, 1) == pytest.approx(5 / 6, rel=1e-14)
    assert m_entry(reference_params, REFERENCE, 0) == pytest.approx(46 / 45, rel=1e-14)
    assert m_entry(reference_params, REFERENCE, 1) == pytest.approx(353 / 360, rel=1e-14)


def test_reference_p_star(reference_params, high):
    squared = p_star_squared(REFERENCE, reference_params, high)
    assert abs(squared - high.convert(Fraction(127, 390))) < high.tolerance()
    result = p_star(REFERENCE, reference_params)
    assert result.precision_bits == 256
    assert float(result) == pytest.approx(math.sqrt(127 / 390), rel=1e-15)
    assert float(p_oracle_dense(REFERENCE, reference_params)) == pytest.approx(math.sqrt(127 / 390), rel=1e-15)


def test_reference_power_function(reference_params, high):
    # k(1/4) = (23/24, 23/24), K^-1 k = (23/52, 23/52)
    value = power_pointwise(REFERENCE, reference_params, [Fraction(1, 4)], high)
    assert abs(value ** 2 - high.convert(Fraction(101, 208))) < high.tolerance()
    assert power_pointwise(REFERENCE, reference_params, [0.25]) == pytest.approx(math.sqrt(101 / 208), rel=1e-13)


# ---------------------------------------------------------
# S criterion
# ---------------------------------------------------------


def test_zero_weights_collapse():
    params = SpaceParams.create(1, "list:0,0", 2)
    gv = GeneratingVector(8, (1, 3))
    assert s_quantity(gv, params) == 0
    assert s_oracle(gv, params, 10) == 0


@settings(max_examples=40, deadline=None)
@given(
    st.integers(2, 97).flatmap(lambda n: st.tuples(
        st.just(n), st.lists(st.sampled_from(units(n)), min_size=1, max_size=4)
    )),
    st.integers(0, 3),
    st.sampled_from(WEIGHT_SCHEMES),
)
def test_s_quantity_dilation_symmetry(case, j, weights):
    n, z = case
    j = j % len(z)
    gv = GeneratingVector(n, tuple(z))
    params = SpaceParams.create(1, weights, gv.d)
    assert s_quantity(gv.mirrored(j), params) == s_quantity(gv, params)


@pytest.mark.parametrize("n, d, alpha", [(2, 1, 1), (8, 2, 1), (16, 2, 2)])
@pytest.mark.parametrize("weights", ["poly3a", "equal"])
def test_s_oracle_approaches_closed_form(n, d, alpha, weights):
    params = SpaceParams.create(alpha, weights, d)
    gv = spread_vector(n, d)
    exact = s_quantity(gv, params)
    total = kernel_diagonal(params)
    previous = 0.0
    for H in (10, 50, 200):
        value = s_oracle(gv, params, H)
        assert value >= previous - 1e-12
        assert value <= exact + 1e-12
        assert exact - value <= 2 * total * (total - box_sum(params, H)) + 1e-12
        previous = value
    if alpha == 2:
        assert exact - previous <= 1e-3


def test_s_oracle_reference_within_truncation(reference_params):
    assert 77 / 360 - s_oracle(REFERENCE, reference_params, 100) <= 1e-2


def test_s_oracle_budget(reference_params):
    gv = GeneratingVector(16, (1, 3, 5))
    params = SpaceParams.create(1, "poly3a", 3)
    with pytest.raises(BudgetExceededError):
        s_oracle(gv, params, 100, Budget(cells=1000))
    cancelled = threading.Event()
    cancelled.set()
    with pytest.raises(BudgetExceededError):
        s_oracle(REFERENCE, reference_params, 10, Budget(cancel=cancelled))


def test_s_quantity_increases_with_weight():
    gv = GeneratingVector(16, (1,))
    values = [s_quantity(gv, SpaceParams.create(1, f"list:{g}", 1)) for g in (0.01, 0.05, 0.1, 0.5, 1, 2)]
    assert all(a < b for a, b in zip(values, values[1:]))


def test_unsupported_weights():
    class GeneralWeights:
        name = "general"

        def available(self, d):
            return True

    params = SpaceParams(1, GeneralWeights(), 1)
    with pytest.raises(UnsupportedWeightsError):
        s_quantity(REFERENCE, params)


def test_dimension_mismatch(reference_params):
    with pytest.raises(ValueError):
        s_quantity(GeneratingVector(8, (1, 3)), reference_params)


def test_clamp():
    assert _clamp(-1e-20, 1.0, NATIVE, "S") == 0
    assert _clamp(0.5, 1.0, NATIVE, "S") == 0.5
    with pytest.raises(PrecisionFailureError, match="precision"):
        _clamp(-1e-3, 1.0, NATIVE, "S")


# ---------------------------------------------------------
# Matrix entries
# ---------------------------------------------------------


def test_k_entry_shift_zero_is_diagonal():
    params = SpaceParams.create(2, "geo09", 3)
    gv = GeneratingVector(16, (1, 5, 7))
    assert k_entry(params, gv, 0) == pytest.approx(kernel_diagonal(params), rel=1e-14)


@pytest.mark.parametrize("shift", range(1, 13))
def test_entries_symmetric(shift):
    params = SpaceParams.create(1, "poly2", 2)
    gv = GeneratingVector(13, (1, 5))
    assert k_entry(params, gv, shift) == pytest.approx(k_entry(params, gv, 13 - shift), rel=1e-14)
    assert m_entry(params, gv, shift) == pytest.approx(m_entry(params, gv, 13 - shift), rel=1e-14)


def test_columns_match_entries(high):
    params = SpaceParams.create(2, "poly3a", 3)
    gv = GeneratingVector(9, (1, 2, 4))
    k = kernel_column(gv, params, high)
    m = m_column(gv, params, high)
    for shift in range(9):
        assert abs(k[shift] - k_entry(params, gv, shift, high)) < high.tolerance()
        assert abs(m[shift] - m_entry(params, gv, shift, high)) < high.tolerance()


@pytest.mark.parametrize("shift", range(5))
def test_m_entry_truncated_fourier(shift):
    params = SpaceParams.create(1, "equal", 1)
    gv = GeneratingVector(5, (2,))
    gamma = params.gamma(1)
    h = np.arange(1, 10 ** 4 + 1, dtype=np.float64)
    x = (shift * 2 % 5) / 5
    series = 1 + 2 * gamma ** 2 * np.sum(np.cos(2 * np.pi * h * x) / h ** 4)
    assert m_entry(params, gv, shift) == pytest.approx(series, abs=1e-6)


# ---------------------------------------------------------
# P criterion
# ---------------------------------------------------------


@pytest.mark.parametrize("n", [8, 16, 32])
@pytest.mark.parametrize("d", [1, 2, 4])
@pytest.mark.parametrize("alpha", [1, 2])
@pytest.mark.parametrize("weights", WEIGHT_SCHEMES)
def test_p_star_matches_dense_oracle(n, d, alpha, weights, high):
    params = SpaceParams.create(alpha, weights, d)
    gv = spread_vector(n, d)
    assert relative_error(p_star(gv, params, high).value, p_oracle_dense(gv, params, high)) <= 1e-8


@pytest.mark.slow
@pytest.mark.parametrize("d", [1, 2, 4])
@pytest.mark.parametrize("alpha", [1, 2])
@pytest.mark.parametrize("weights", WEIGHT_SCHEMES)
def test_p_star_matches_dense_oracle_n64(d, alpha, weights, high):
    params = SpaceParams.create(alpha, weights, d)
    gv = spread_vector(64, d)
    assert relative_error(p_star(gv, params, high).value, p_oracle_dense(gv, params, high)) <= 1e-8


def test_dense_oracle_size_guard(reference_params):
    with pytest.raises(BudgetExceededError):
        p_oracle_dense(GeneratingVector(256, (1,)), reference_params)
    cancelled = threading.Event()
    cancelled.set()
    with pytest.raises(BudgetExceededError, match="cancelled"):
        p_oracle_dense(REFERENCE, reference_params, budget=Budget(cancel=cancelled))


def test_trace_identity(high):
    params = SpaceParams.create(1, "geo09", 3)
    gv = GeneratingVector(32, (1, 13, 9))
    trace = ratio_trace(m_column(gv, params, high), kernel_column(gv, params, high), high)
    squared = p_star_squared(gv, params, high)
    assert abs(squared + trace - kernel_diagonal(params, high)) < high.tolerance()


def test_p_star_zero_weights_is_singular():
    params = SpaceParams.create(1, "list:0,0", 2)
    with pytest.raises(SingularOperatorError):
        p_star(GeneratingVector(4, (1, 3)), params)


@pytest.mark.parametrize("n, z", [(8, (1, 3)), (16, (1, 7, 5)), (15, (2, 4))])
def test_p_star_dilation_symmetry(n, z, high):
    gv = GeneratingVector(n, z)
    params = SpaceParams.create(1, "poly2", gv.d)
    expected = p_star_squared(gv, params, high)
    for j in range(gv.d):
        assert p_star_squared(gv.mirrored(j), params, high) == expected


def test_power_function_vanishes_at_nodes(high):
    params = SpaceParams.create(1, "poly3a", 2)
    gv = GeneratingVector(256, (1, 99))
    nodes = lattice_points(gv).as_array()
    assert np.all(power_squared_batch(gv, params, nodes) <= 1e-12)
    small = GeneratingVector(16, (1, 5))
    for k in range(16):
        point = lattice_points(small).point(k, high)
        assert power_pointwise(small, params, point, high) <= 1e-8


def test_power_function_bounded_by_diagonal():
    params = SpaceParams.create(2, "equal", 3)
    gv = GeneratingVector(64, (1, 19, 27))
    points = np.random.default_rng(0).random((200, 3))
    values = power_squared_batch(gv, params, points)
    assert np.all(values >= 0)
    assert np.all(values <= kernel_diagonal(params))
    assert power_pointwise(gv, params, points[0]) == pytest.approx(math.sqrt(values[0]), rel=1e-12)


@pytest.mark.parametrize("n", [2, 4, 8, 16])
def test_integral_oracle_matches_p_star(n, high):
    params = SpaceParams.create(1, "poly3a", 1)
    gv = GeneratingVector(n, (1,))
    assert abs(p_integral_oracle(gv, params) - float(p_star(gv, params, high))) <= 1e-4


def test_integral_oracle_two_dimensions(high):
    params = SpaceParams.create(1, "poly3a", 2)
    gv = GeneratingVector(8, (1, 3))
    assert abs(p_integral_oracle(gv, params, panels=32) - float(p_star(gv, params, high))) <= 1e-4


def test_integral_oracle_guards(reference_params):
    params = SpaceParams.create(1, "poly3a", 3)
    with pytest.raises(ValueError):
        p_integral_oracle(GeneratingVector(4, (1, 1, 3)), params)
    with pytest.raises(BudgetExceededError):
        p_integral_oracle(REFERENCE, reference_params, budget=Budget(cells=10))
