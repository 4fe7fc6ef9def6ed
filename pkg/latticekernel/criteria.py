"""
Search criteria for rank-1 lattices in weighted Korobov spaces.

S-criterion: closed form of the double sum over frequencies and the dual
lattice, and S* = sqrt(2) S^(1/4).

P-criterion: L2 average of the power function of the kernel interpolant,
P*^2 = K(y, y) - tr(K^-1 M), where K and M are symmetric circulant matrices
whose first columns come from Bernoulli polynomials of order 2 alpha and 4 alpha.

Fast evaluators read Bernoulli values from residue tables folded so that the
residues r and n - r share one entry; z_j -> n - z_j therefore leaves every
column bitwise unchanged. Brute-force oracles use the untabulated closed
forms or explicit frequency sums and are meant for small instances.
"""
import logging
import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .korobov_space import (
    ProductWeights,
    bernoulli_periodic,
    kernel_diagonal,
    kernel_sections,
    m_coefficient,
    omega,
    omega_coefficient,
    zeta_even,
)
from .lattice import lattice_points
from .spectral import (
    NATIVE,
    CirculantOperator,
    dense_ratio_trace,
    precision,
    ratio_trace,
)

logger = logging.getLogger(__name__)

P_PRECISION_BITS = 256
DEFAULT_CELL_BUDGET = 20_000_000
DENSE_ORACLE_MAX_N = 128


class UnsupportedWeightsError(ValueError):
    pass


class PrecisionFailureError(ArithmeticError):
    pass


class BudgetExceededError(RuntimeError):
    pass


@dataclass(frozen=True)
class CriterionValue:
    kind: str
    value: object
    n: int
    d: int
    alpha: int
    weights: str
    precision_bits: int

    def __float__(self):
        return float(self.value)


class Budget:
    """Cooperative resource guard: a cell allowance plus an optional cancel event."""

    def __init__(self, cells=DEFAULT_CELL_BUDGET, cancel=None):
        self.cells = cells
        self.cancel = cancel or threading.Event()

    def reserve(self, cells, what):
        if cells > self.cells:
            raise BudgetExceededError(f"{what} needs {cells} cells, budget is {self.cells}")
        self.check()

    def check(self):
        if self.cancel.is_set():
            raise BudgetExceededError("evaluation cancelled")


def _check_params(gv, params):
    if not isinstance(params.weights, ProductWeights):
        raise UnsupportedWeightsError(
            f"fast evaluators need product weights, got {type(params.weights).__name__}"
        )
    if gv.d != params.d:
        raise ValueError(f"generating vector has dimension {gv.d}, space has {params.d}")


def _clamp(value, scale, ctx, label):
    """Clamp round-off negatives to zero, reject anything beyond the tolerance."""
    if value >= 0:
        return value
    if -value <= ctx.tolerance() * abs(scale):
        return ctx.convert(0)
    raise PrecisionFailureError(
        f"{label} evaluated to {float(value):.3e} at {ctx.mantissa_bits} bits, "
        f"beyond round-off; increase the precision bits"
    )


# ---------------------------------------------------------
# Residue tables and circulant first columns
# ---------------------------------------------------------


@lru_cache(maxsize=64)
def bernoulli_residue_table(n, q, ctx=NATIVE):
    """B_q(r/n) for r = 0..n-1, with r and n - r folded onto min(r, n - r)."""
    residues = np.arange(n)
    folded = np.minimum(residues, n - residues)
    table = bernoulli_periodic(q, ctx.fractions(folded, n), ctx)
    table = np.asarray(table, dtype=np.float64 if ctx.is_native else object)
    table.flags.writeable = False
    return table


@lru_cache(maxsize=64)
def omega_residue_table(n, alpha, ctx=NATIVE):
    table = omega_coefficient(alpha, ctx) * bernoulli_residue_table(n, 2 * alpha, ctx)
    table.flags.writeable = False
    return table


def kernel_factor(n, alpha, gamma, zj, ctx=NATIVE):
    """1 + gamma omega(alpha, {l z_j / n}) for l = 0..n-1."""
    residues = (np.arange(n, dtype=np.int64) * zj) % n
    return 1 + gamma * omega_residue_table(n, alpha, ctx)[residues]


def m_factor(n, alpha, gamma, zj, ctx=NATIVE):
    """1 - (2 pi)^(4 alpha)/(4 alpha)! gamma^2 B_4alpha({l z_j / n}) for l = 0..n-1."""
    residues = (np.arange(n, dtype=np.int64) * zj) % n
    return 1 - m_coefficient(alpha, ctx) * gamma ** 2 * bernoulli_residue_table(n, 4 * alpha, ctx)[residues]


def kernel_column(gv, params, ctx=NATIVE):
    """First column of K, K[l, 0] = prod_j (1 + gamma_j omega(alpha, {l z_j / n}))."""
    _check_params(gv, params)
    column = ctx.ones(gv.n)
    for gamma, zj in zip(params.gammas(ctx), gv.z):
        column = column * kernel_factor(gv.n, params.alpha, gamma, zj, ctx)
    return column


def m_column(gv, params, ctx=NATIVE):
    """First column of M."""
    _check_params(gv, params)
    column = ctx.ones(gv.n)
    for gamma, zj in zip(params.gammas(ctx), gv.z):
        column = column * m_factor(gv.n, params.alpha, gamma, zj, ctx)
    return column


def k_entry(params, gv, shift, ctx=NATIVE):
    """K[l, k] for shift = (l - k) mod n, from the closed form."""
    _check_params(gv, params)
    value = ctx.convert(1)
    for gamma, zj in zip(params.gammas(ctx), gv.z):
        x = ctx.fraction((shift * zj) % gv.n, gv.n)
        value *= 1 + gamma * omega(params.alpha, x, ctx)
    return value


def m_entry(params, gv, shift, ctx=NATIVE):
    """M[l, k] for shift = (l - k) mod n, from the closed form."""
    _check_params(gv, params)
    coefficient = m_coefficient(params.alpha, ctx)
    value = ctx.convert(1)
    for gamma, zj in zip(params.gammas(ctx), gv.z):
        x = ctx.fraction((shift * zj) % gv.n, gv.n)
        value *= 1 - coefficient * gamma ** 2 * bernoulli_periodic(4 * params.alpha, x, ctx)
    return value


# ---------------------------------------------------------
# S criterion
# ---------------------------------------------------------


def s_leading_product(params, ctx=NATIVE):
    """prod_j (1 + 2 gamma_j^2 zeta(4 alpha))."""
    zeta = zeta_even(4 * params.alpha, ctx)
    value = ctx.convert(1)
    for gamma in params.gammas(ctx):
        value *= 1 + 2 * gamma ** 2 * zeta
    return value


def s_quantity(gv, params, ctx=NATIVE):
    """
    S(z) = -prod_j (1 + 2 gamma_j^2 zeta(4 alpha)) + (1/n) prod_j (1 + 2 gamma_j zeta(2 alpha))^2
           + (1/n) sum_{k=1}^{n-1} prod_j (1 + gamma_j omega(alpha, {k z_j / n}))^2
    """
    column = kernel_column(gv, params, ctx)
    terms = (
        -s_leading_product(params, ctx),
        kernel_diagonal(params, ctx) ** 2 / gv.n,
        ctx.fsum(column[1:] ** 2) / gv.n,
    )
    value = ctx.fsum(terms)
    return _clamp(value, max(abs(t) for t in terms), ctx, "S")


def s_star_from_quantity(quantity, ctx=NATIVE):
    return ctx.sqrt(2) * ctx.sqrt(ctx.sqrt(quantity))


def s_star(gv, params, ctx=NATIVE):
    """S*(z) = sqrt(2) S(z)^(1/4)."""
    value = s_star_from_quantity(s_quantity(gv, params, ctx), ctx)
    return CriterionValue("S", value, gv.n, gv.d, params.alpha, params.weights.name, ctx.mantissa_bits)


def s_oracle(gv, params, H, budget=None):
    """
    Brute-force double sum over frequencies h and h + l, l != 0, l . z = 0 mod n,
    both restricted to the box |component| <= H. Native precision.
    Terms sharing the residue h . z mod n are grouped:
    sum_c [(sum_{h in c} w(h))^2 - sum_{h in c} w(h)^2] with w = 1 / r.
    """
    _check_params(gv, params)
    budget = budget or Budget()
    budget.reserve((2 * H + 1) ** gv.d, f"S oracle with H={H}, d={gv.d}")
    frequencies = np.arange(-H, H + 1, dtype=np.int64)
    magnitudes = np.abs(frequencies).astype(np.float64)
    weights = np.ones(1)
    residues = np.zeros(1, dtype=np.int64)
    for gamma, zj in zip(params.gammas(), gv.z):
        with np.errstate(divide="ignore", invalid="ignore"):
            weights_j = np.where(frequencies == 0, 1.0, gamma / magnitudes ** (2 * params.alpha))
        residues_j = (frequencies * zj) % gv.n
        weights = np.outer(weights, weights_j).ravel()
        residues = ((residues[:, None] + residues_j[None, :]) % gv.n).ravel()
        budget.check()
    class_sums = np.bincount(residues, weights=weights, minlength=gv.n)
    class_squares = np.bincount(residues, weights=weights ** 2, minlength=gv.n)
    return max(0.0, float(np.sum(class_sums ** 2 - class_squares)))


# ---------------------------------------------------------
# P criterion
# ---------------------------------------------------------


def p_star_squared(gv, params, ctx=None):
    ctx = ctx or precision(P_PRECISION_BITS)
    diagonal = kernel_diagonal(params, ctx)
    trace = ratio_trace(m_column(gv, params, ctx), kernel_column(gv, params, ctx), ctx)
    return _clamp(diagonal - trace, diagonal, ctx, "P*^2")


def p_star(gv, params, ctx=None):
    """P*(z) = [prod_j (1 + 2 gamma_j zeta(2 alpha)) - sum_l m_hat_l / k_hat_l]^(1/2)."""
    ctx = ctx or precision(P_PRECISION_BITS)
    value = ctx.sqrt(p_star_squared(gv, params, ctx))
    return CriterionValue("P", value, gv.n, gv.d, params.alpha, params.weights.name, ctx.mantissa_bits)


def _power_squared(gv, params, points, ctx):
    nodes = lattice_points(gv).as_array(ctx)
    sections = kernel_sections(params, nodes, points, ctx)
    operator = CirculantOperator(kernel_column(gv, params, ctx), ctx)
    diagonal = kernel_diagonal(params, ctx)
    if ctx.is_native:
        coefficients = operator.solve(sections, assume_spd=True)
        values = diagonal - np.sum(sections * coefficients, axis=1)
    else:
        values = [
            diagonal - ctx.fsum(row * operator.solve(row, assume_spd=True)) for row in sections
        ]
    return [_clamp(value, diagonal, ctx, "power function") for value in values]


def power_pointwise(gv, params, y, ctx=NATIVE):
    """P(y) = [K(y, y) - k(y)^T K^-1 k(y)]^(1/2) with k(y)_k = K(t_k, y)."""
    _check_params(gv, params)
    point = ctx.asarray(y)[None, :]
    return ctx.sqrt(_power_squared(gv, params, point, ctx)[0])


def power_squared_batch(gv, params, points):
    """P(y)^2 at many points (m, d), native precision."""
    _check_params(gv, params)
    return np.asarray(_power_squared(gv, params, np.atleast_2d(points), NATIVE))


def p_oracle_dense(gv, params, ctx=None, budget=None):
    """[K(y, y) - tr(K^-1 M)]^(1/2) from full n x n matrices built entrywise."""
    ctx = ctx or precision(P_PRECISION_BITS)
    budget = budget or Budget()
    if gv.n > DENSE_ORACLE_MAX_N:
        raise BudgetExceededError(f"dense oracle is limited to n <= {DENSE_ORACLE_MAX_N}, got {gv.n}")
    budget.check()
    first_k = np.array([k_entry(params, gv, shift, ctx) for shift in range(gv.n)])
    first_m = np.array([m_entry(params, gv, shift, ctx) for shift in range(gv.n)])
    grid = np.arange(gv.n)
    shifts = (grid[:, None] - grid[None, :]) % gv.n
    diagonal = kernel_diagonal(params, ctx)
    budget.check()
    trace = dense_ratio_trace(first_m[shifts], first_k[shifts], ctx)
    return ctx.sqrt(_clamp(diagonal - trace, diagonal, ctx, "dense P*^2"))


def p_integral_oracle(gv, params, panels=64, degree=8, budget=None, chunk=4096):
    """
    (integral of P(y)^2 over [0,1]^d)^(1/2) by composite Gauss-Legendre
    quadrature, d <= 2, native precision.
    """
    _check_params(gv, params)
    if gv.d > 2:
        raise ValueError(f"integral oracle supports d <= 2, got {gv.d}")
    budget = budget or Budget()
    count = (panels * degree) ** gv.d
    budget.reserve(count * gv.n, f"integral oracle with {panels} panels x degree {degree}")
    nodes, weights = np.polynomial.legendre.leggauss(degree)
    left = np.arange(panels) / panels
    abscissae = (left[:, None] + (nodes[None, :] + 1) / (2 * panels)).ravel()
    weights = np.tile(weights / (2 * panels), panels)
    if gv.d == 1:
        points = abscissae[:, None]
        point_weights = weights
    else:
        x, y = np.meshgrid(abscissae, abscissae, indexing="ij")
        points = np.column_stack([x.ravel(), y.ravel()])
        point_weights = np.outer(weights, weights).ravel()
    total = 0.0
    for start in range(0, len(points), chunk):
        budget.check()
        values = power_squared_batch(gv, params, points[start:start + chunk])
        total += float(np.dot(point_weights[start:start + chunk], values))
    return float(np.sqrt(total))
