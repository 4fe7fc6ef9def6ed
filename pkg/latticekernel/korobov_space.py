"""
Closed-form ingredients of the weighted Korobov space: product weights,
the decay function r, even zeta values, Bernoulli polynomials and the
reproducing kernel. Smoothness is restricted to integers so that the
Bernoulli closed forms apply.
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .spectral import NATIVE

logger = logging.getLogger(__name__)


class UnsupportedOrderError(ValueError):
    pass


# Coefficients from the leading power down to the constant term.
_BERNOULLI_COEFFICIENTS = {
    2: (1, -1, Fraction(1, 6)),
    4: (1, -2, 1, 0, Fraction(-1, 30)),
    6: (1, -3, Fraction(5, 2), 0, Fraction(-1, 2), 0, Fraction(1, 42)),
    8: (1, -4, Fraction(14, 3), 0, Fraction(-7, 3), 0, Fraction(2, 3), 0, Fraction(-1, 30)),
    10: (1, -5, Fraction(15, 2), 0, -7, 0, 5, 0, Fraction(-3, 2), 0, Fraction(5, 66)),
    12: (
        1, -6, 11, 0, Fraction(-33, 2), 0, 22, 0, Fraction(-33, 2), 0, 5, 0, Fraction(-691, 2730),
    ),
}

SUPPORTED_ORDERS = tuple(sorted(_BERNOULLI_COEFFICIENTS))


def _coefficients(q):
    try:
        return _BERNOULLI_COEFFICIENTS[q]
    except KeyError:
        raise UnsupportedOrderError(
            f"Bernoulli polynomial of order {q} is not supported, use one of {SUPPORTED_ORDERS}"
        ) from None


def bernoulli_periodic(q, x, ctx=NATIVE):
    """
    B_q(x) by Horner's rule at the precision of ctx.
    x may be a scalar or an array and must already be reduced to [0, 1).
    """
    coefficients = _coefficients(q)
    value = ctx.convert(coefficients[0])
    for coefficient in coefficients[1:]:
        value = value * x
        if coefficient:
            value = value + ctx.convert(coefficient)
    return value


def zeta_even(two_alpha, ctx=NATIVE):
    """zeta(q) = (-1)^(q/2+1) B_q(0) (2 pi)^q / (2 q!) for supported even q."""
    q = two_alpha
    constant = Fraction(_coefficients(q)[-1]) * (-1) ** (q // 2 + 1) / (2 * math.factorial(q))
    return ctx.convert(constant) * (2 * ctx.pi) ** q


def omega_coefficient(alpha, ctx=NATIVE):
    """(-1)^(alpha+1) (2 pi)^(2 alpha) / (2 alpha)!"""
    return (-1) ** (alpha + 1) * (2 * ctx.pi) ** (2 * alpha) / math.factorial(2 * alpha)


def m_coefficient(alpha, ctx=NATIVE):
    """(2 pi)^(4 alpha) / (4 alpha)!"""
    return (2 * ctx.pi) ** (4 * alpha) / math.factorial(4 * alpha)


def omega(alpha, x, ctx=NATIVE):
    """One-dimensional kernel increment (-1)^(alpha+1) (2 pi)^(2 alpha)/(2 alpha)! B_2alpha(x)."""
    return omega_coefficient(alpha, ctx) * bernoulli_periodic(2 * alpha, x, ctx)


# ---------------------------------------------------------
# Weights
# ---------------------------------------------------------

_SCHEMES = ("poly3a", "poly2", "geo09", "equal", "list")


@dataclass(frozen=True)
class ProductWeights:
    """
    Product weights gamma_u = prod_{j in u} gamma_j, gamma_empty = 1.
    Named schemes carry the pi^(-2 alpha) scaling, explicit lists are taken as given.
    """

    scheme: str
    values: tuple = ()

    def __post_init__(self):
        if self.scheme not in _SCHEMES:
            raise ValueError(f"Unknown weight scheme '{self.scheme}', expected one of {_SCHEMES}")
        if self.scheme == "list":
            if not self.values:
                raise ValueError("Explicit weight list is empty")
            if any(v < 0 for v in self.values):
                raise ValueError(f"Weights must be nonnegative, got {self.values}")

    @classmethod
    def from_name(cls, name):
        """Parse 'poly3a' | 'poly2' | 'geo09' | 'equal' | 'list:<comma-separated>'."""
        name = name.strip()
        if name.startswith("list:"):
            try:
                values = tuple(Fraction(v.strip()) for v in name[len("list:"):].split(","))
            except ValueError as e:
                raise ValueError(f"Invalid explicit weight list '{name}': {e}") from e
            return cls("list", values)
        if name == "list":
            raise ValueError("Explicit weights need values, e.g. 'list:1,0.5'")
        return cls(name)

    @classmethod
    def explicit(cls, values):
        return cls("list", tuple(Fraction(v) for v in values))

    @property
    def name(self):
        if self.scheme == "list":
            return "list:" + ",".join(str(v) for v in self.values)
        return self.scheme

    def available(self, d):
        return self.scheme != "list" or len(self.values) >= d

    def gamma(self, j, alpha, ctx=NATIVE):
        """gamma_j for 1-based coordinate index j."""
        if j < 1:
            raise ValueError(f"Coordinate index starts at 1, got {j}")
        if self.scheme == "list":
            return ctx.convert(self.values[j - 1])
        if self.scheme == "poly3a":
            base = Fraction(1, j ** (3 * alpha))
        elif self.scheme == "poly2":
            base = Fraction(1, j ** 2)
        elif self.scheme == "geo09":
            base = Fraction(9, 10) ** (j - 1)
        else:
            base = Fraction(1)
        return ctx.convert(base) / ctx.pi ** (2 * alpha)


@dataclass(frozen=True)
class SpaceParams:
    alpha: int
    weights: ProductWeights
    d: int

    def __post_init__(self):
        if not isinstance(self.alpha, int) or self.alpha < 1:
            raise ValueError(f"alpha must be a positive integer, got {self.alpha}")
        if self.d < 1:
            raise ValueError(f"dimension must be positive, got {self.d}")
        if not self.weights.available(self.d):
            raise ValueError(
                f"Weight list '{self.weights.name}' has fewer than d={self.d} entries"
            )

    @classmethod
    def create(cls, alpha, weights, d):
        if isinstance(weights, str):
            weights = ProductWeights.from_name(weights)
        return cls(alpha, weights, d)

    def with_dimension(self, d):
        return SpaceParams(self.alpha, self.weights, d)

    def gamma(self, j, ctx=NATIVE):
        return self.weights.gamma(j, self.alpha, ctx)

    def gammas(self, ctx=NATIVE):
        return [self.gamma(j, ctx) for j in range(1, self.d + 1)]


# ---------------------------------------------------------
# Kernel
# ---------------------------------------------------------


def support(h):
    return tuple(j for j, hj in enumerate(h) if hj != 0)


def _check_point(params, point, label):
    if len(point) != params.d:
        raise ValueError(f"{label} has dimension {len(point)}, expected {params.d}")


def kernel_eval(params, x, y, ctx=NATIVE):
    """K(x, y) = prod_j (1 + gamma_j omega(alpha, {x_j - y_j}))."""
    _check_point(params, x, "x")
    _check_point(params, y, "y")
    value = ctx.convert(1)
    for gamma, xj, yj in zip(params.gammas(ctx), x, y):
        difference = (ctx.convert(xj) - ctx.convert(yj)) % 1
        value *= 1 + gamma * omega(params.alpha, difference, ctx)
    return value


def kernel_sections(params, nodes, points, ctx=NATIVE):
    """
    Matrix [K(t_k, y_i)] of shape (len(points), len(nodes)).
    nodes is (n, d), points is (m, d); both in [0, 1]^d.
    """
    nodes = np.atleast_2d(nodes)
    points = np.atleast_2d(points)
    if nodes.shape[1] != params.d or points.shape[1] != params.d:
        raise ValueError(
            f"expected points of dimension {params.d}, got {nodes.shape[1]} and {points.shape[1]}"
        )
    differences = (nodes[None, :, :] - points[:, None, :]) % 1
    factors = 1 + np.asarray(params.gammas(ctx), dtype=differences.dtype) * omega(
        params.alpha, differences, ctx
    )
    return np.prod(factors, axis=2)


def kernel_diagonal(params, ctx=NATIVE):
    """K(y, y) = prod_j (1 + 2 gamma_j zeta(2 alpha)), independent of y."""
    zeta = zeta_even(2 * params.alpha, ctx)
    value = ctx.convert(1)
    for gamma in params.gammas(ctx):
        value *= 1 + 2 * gamma * zeta
    return value


def decay_r(params, h, ctx=NATIVE):
    """r(h) = prod_{j in supp(h)} |h_j|^(2 alpha) / gamma_j, with r(0) = 1."""
    if len(h) != params.d:
        raise ValueError(f"frequency has dimension {len(h)}, expected {params.d}")
    value = ctx.convert(1)
    for j in support(h):
        gamma = params.gamma(j + 1, ctx)
        if gamma == 0:
            return ctx.convert("inf")
        value *= ctx.convert(abs(h[j]) ** (2 * params.alpha)) / gamma
    return value
