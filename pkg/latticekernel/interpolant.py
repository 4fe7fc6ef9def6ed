"""
Kernel interpolant on rank-1 lattice nodes.

The interpolant A(f)(y) = sum_k a_k K(t_k, y) matches f at the nodes; the
coefficients solve the circulant system K a = f_Lambda through its DFT
diagonalisation.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from .criteria import kernel_column
from .korobov_space import decay_r, kernel_sections
from .lattice import lattice_points
from .spectral import NATIVE, CirculantOperator

logger = logging.getLogger(__name__)

# Korobov multiplier of the lattice used for L2 error estimation
EVALUATION_MULTIPLIER = 17797
EVALUATION_CHUNK = 2048


@dataclass(frozen=True)
class TestFunction:
    """Real-valued finite Fourier series f(y) = sum_h c_h exp(2 pi i h.y)."""

    __test__ = False

    d: int
    terms: tuple

    def __post_init__(self):
        terms = tuple(
            sorted(((tuple(int(hj) for hj in h), complex(c)) for h, c in self.terms), key=lambda t: t[0])
        )
        coefficients = {}
        for h, c in terms:
            if len(h) != self.d:
                raise ValueError(f"frequency {h} has dimension {len(h)}, expected {self.d}")
            if h in coefficients:
                raise ValueError(f"frequency {h} appears twice")
            coefficients[h] = c
        for h, c in coefficients.items():
            mirror = tuple(-hj for hj in h)
            partner = coefficients.get(mirror)
            if partner is None or not np.isclose(partner, c.conjugate(), rtol=1e-14, atol=0):
                raise ValueError(f"coefficient of {mirror} must be the conjugate of the one of {h}")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_half(cls, d, terms):
        """Complete the terms with their conjugate partners."""
        full = {}
        for h, c in terms:
            h = tuple(int(hj) for hj in h)
            mirror = tuple(-hj for hj in h)
            if h == mirror:
                full[h] = complex(complex(c).real)
            else:
                full[h] = complex(c)
                full[mirror] = complex(c).conjugate()
        return cls(d, tuple(full.items()))

    @property
    def frequencies(self):
        return np.array([h for h, _ in self.terms], dtype=np.int64).reshape(-1, self.d)

    @property
    def coefficients(self):
        return np.array([c for _, c in self.terms], dtype=np.complex128)

    def scaled(self, factor):
        return TestFunction(self.d, tuple((h, factor * c) for h, c in self.terms))

    def evaluate(self, y):
        return float(self.evaluate_batch(np.asarray(y, dtype=np.float64)[None, :])[0])

    def evaluate_batch(self, points):
        points = np.atleast_2d(points)
        if not self.terms:
            return np.zeros(len(points))
        phases = np.exp(2j * np.pi * (points @ self.frequencies.T))
        return np.real(phases @ self.coefficients)

    def __call__(self, y):
        return self.evaluate(y)


@dataclass(frozen=True)
class Interpolant:
    gv: object
    params: object
    coefficients: np.ndarray
    kernel_column: np.ndarray
    nodes: np.ndarray


def fit(gv, params, node_values, ctx=NATIVE):
    """Solve K a = node_values for the interpolant coefficients."""
    node_values = ctx.asarray(node_values)
    if len(node_values) != gv.n:
        raise ValueError(f"expected {gv.n} node values, got {len(node_values)}")
    column = kernel_column(gv, params, ctx)
    operator = CirculantOperator(column, ctx)
    coefficients = operator.solve(node_values, assume_spd=True)
    return Interpolant(gv, params, coefficients, operator.first_column, lattice_points(gv).as_array(ctx))


def fit_function(gv, params, f):
    """Interpolant of a TestFunction from its values at the lattice nodes."""
    return fit(gv, params, f.evaluate_batch(lattice_points(gv).as_array()))


def evaluate_batch(ip, points, chunk=EVALUATION_CHUNK):
    """A(f) at many points (m, d), evaluated a chunk of points at a time."""
    points = np.atleast_2d(points)
    values = []
    for start in range(0, len(points), chunk):
        sections = kernel_sections(ip.params, ip.nodes, points[start:start + chunk])
        values.append(sections @ ip.coefficients)
    return np.concatenate(values) if values else np.zeros(0)


def evaluate(ip, y):
    """A(f)(y) = sum_k a_k K(t_k, y)."""
    return evaluate_batch(ip, np.asarray(y)[None, :])[0]


def function_norm(f, params):
    """(sum_h |c_h|^2 r(h))^(1/2) in the Korobov space of params."""
    total = 0.0
    for h, c in f.terms:
        if c == 0:
            continue
        total += abs(c) ** 2 * float(decay_r(params, h))
    return math.sqrt(total)


def random_unit_function(params, n_terms, max_freq, seed, include_constant=False):
    """
    Random real trigonometric polynomial of unit norm. n_terms counts
    frequency pairs {h, -h}; with include_constant one of them is h = 0.
    Frequencies touching a zero-weight coordinate are never drawn.
    """
    if n_terms < 1:
        raise ValueError(f"n_terms must be at least 1, got {n_terms}")
    d = params.d
    active = [j for j in range(d) if params.gamma(j + 1) > 0]
    available = ((2 * max_freq + 1) ** len(active) - 1) // 2
    wanted = n_terms - 1 if include_constant else n_terms
    if wanted > available:
        raise ValueError(f"only {available} frequency pairs with |h_j| <= {max_freq}, asked for {wanted}")
    rng = np.random.default_rng(seed)
    half = []
    if include_constant:
        half.append(((0,) * d, 1.0))
    chosen = set()
    while len(chosen) < wanted:
        h = [0] * d
        for j, hj in zip(active, rng.integers(-max_freq, max_freq + 1, size=len(active))):
            h[j] = int(hj)
        h = tuple(h)
        mirror = tuple(-hj for hj in h)
        if not any(h) or h in chosen or mirror in chosen:
            continue
        chosen.add(h)
        half.append((h, complex(rng.standard_normal(), rng.standard_normal())))
    f = TestFunction.from_half(d, half)
    return f.scaled(1 / function_norm(f, params))


def evaluation_vector(n_eval, d):
    """Korobov vector (1, a, a^2, ...) mod n_eval, each component moved up to the next unit."""
    if n_eval == 1:
        return (0,) * d
    z = []
    for j in range(d):
        zj = pow(EVALUATION_MULTIPLIER, j, n_eval)
        while math.gcd(zj, n_eval) != 1:
            zj = zj % (n_eval - 1) + 1
        z.append(zj)
    return tuple(z)


def evaluation_points(n_eval, d, seed):
    """Shifted rank-1 lattice used to estimate L2 norms."""
    if n_eval < 1:
        raise ValueError(f"n_eval must be at least 1, got {n_eval}")
    z = np.asarray(evaluation_vector(n_eval, d), dtype=np.int64)
    shift = np.random.default_rng(seed).random(d)
    residues = np.outer(np.arange(n_eval, dtype=np.int64), z) % n_eval
    return (residues / n_eval + shift) % 1


def l2_error_estimate(ip, f, n_eval, seed):
    """RMS of f - A(f) over a shifted evaluation lattice."""
    points = evaluation_points(n_eval, ip.gv.d, seed)
    errors = f.evaluate_batch(points) - evaluate_batch(ip, points)
    estimate = float(np.sqrt(np.mean(errors ** 2)))
    logger.debug(f"L2 error estimate over {n_eval} points: {estimate:.6e}")
    return estimate
