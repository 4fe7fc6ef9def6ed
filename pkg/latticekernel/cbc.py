"""
Component-by-component construction of generating vectors.

cbc_s minimises the S-criterion one coordinate at a time. For candidate z at
step s the scored vector is

    W(z) = (1/n) Psi p_{s-1} gamma_s^2 + (2/n) Omega p_{s-1} gamma_s

with Omega[z, k] = omega(alpha, {k z / n}), Psi = Omega^2 - 2 zeta(2 alpha) and
p_{s-1}(k) = prod_{j<s} (1 + gamma_j omega(alpha, {k z_j / n}))^2, so that

    S(z_1..z_{s-1}, z) = W(z) + (1 + 2 zeta(2 alpha) gamma_s^2) mean(p_{s-1})
                         - prod_{j<=s} (1 + 2 gamma_j^2 zeta(4 alpha)).

cbc_p maximises T_s(z) = tr(K_s^-1 M_s) over the candidates, which minimises
P* since the leading product does not depend on z.

Ties go to the smallest candidate.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sympy import isprime, primitive_root

from .criteria import (
    Budget,
    BudgetExceededError,
    P_PRECISION_BITS,
    _clamp,
    kernel_factor,
    m_factor,
    omega_residue_table,
    p_oracle_dense,
    s_leading_product,
    s_quantity,
    s_star_from_quantity,
)
from .korobov_space import kernel_diagonal, zeta_even
from .lattice import GeneratingVector, units
from .spectral import NATIVE, SingularOperatorError, precision, ratio_trace

logger = logging.getLogger(__name__)

EXHAUSTIVE_MAX_N = 64
EXHAUSTIVE_MAX_D = 4
MATVEC_CHUNK = 256


class ConstructionError(RuntimeError):
    pass


@dataclass
class CbcResultS:
    gv: GeneratingVector
    s_values: list
    s_star_values: list
    seconds: float

    @property
    def value(self):
        return self.s_star_values[-1]


@dataclass
class CbcResultP:
    gv: GeneratingVector
    t_values: list
    value: object
    precision_bits: int
    seconds: float
    diagnostics: list = field(default_factory=list)


# ---------------------------------------------------------
# S construction
# ---------------------------------------------------------


def _direct_products(n, candidates, table, p):
    """table[(z k) mod n] @ p for every candidate z."""
    products = []
    ks = np.arange(n, dtype=np.int64)
    for start in range(0, len(candidates), MATVEC_CHUNK):
        chunk = np.asarray(candidates[start:start + MATVEC_CHUNK], dtype=np.int64)
        products.append(table[np.outer(chunk, ks) % n].dot(p))
    return np.concatenate(products)


def _fast_products(n, candidates, table, p):
    """
    Same products for prime n: with z = g^i and k = g^-j the matrix entry
    depends on i - j only, so the products are one cyclic convolution of
    length n - 1.
    """
    m = n - 1
    generator = int(primitive_root(n))
    powers = np.array([pow(generator, i, n) for i in range(m)], dtype=np.int64)
    inverse_powers = powers[(-np.arange(m)) % m]
    convolution = np.real(np.fft.ifft(np.fft.fft(table[powers]) * np.fft.fft(p[inverse_powers])))
    by_candidate = np.empty(m)
    by_candidate[powers - 1] = table[0] * p[0] + convolution
    # z and n - z share their value exactly, as on the direct path
    zs = np.asarray(candidates, dtype=np.int64)
    return by_candidate[np.minimum(zs, n - zs) - 1]


def use_fast_path(n, ctx):
    return ctx.is_native and n > 3 and isprime(n)


def cbc_s_matvec(n, candidates, omega_table, psi_table, p, gamma, ctx=NATIVE, fast=None):
    """W(z) for every candidate z (see module docstring)."""
    if fast is None:
        fast = use_fast_path(n, ctx)
    if fast and not use_fast_path(n, ctx):
        raise ValueError(f"FFT scoring path needs prime n > 3 at native precision, got n={n}")
    products = _fast_products if fast else _direct_products
    omega_p = products(n, candidates, omega_table, p)
    psi_p = products(n, candidates, psi_table, p)
    return (gamma ** 2 * psi_p + 2 * gamma * omega_p) / n


def _argmin(values, tolerance):
    """First index within round-off of the minimum, so ties go to the smallest candidate."""
    lowest = min(values)
    threshold = lowest + tolerance * max(abs(v) for v in values)
    return next(i for i, value in enumerate(values) if value <= threshold)


def cbc_s(n, dmax, params, ctx=NATIVE, fast=None):
    """Fast CBC construction with the S-criterion."""
    started = time.perf_counter()
    params = params.with_dimension(dmax)
    candidates = units(n)
    omega_table = omega_residue_table(n, params.alpha, ctx)
    zeta2 = zeta_even(2 * params.alpha, ctx)
    psi_table = omega_table ** 2 - 2 * zeta2
    p = ctx.ones(n)
    z = []
    s_values = []
    s_star_values = []
    for s, gamma in enumerate(params.gammas(ctx), start=1):
        scores = cbc_s_matvec(n, candidates, omega_table, psi_table, p, gamma, ctx, fast)
        best = _argmin(scores, ctx.tolerance())
        zs = candidates[best]
        leading = s_leading_product(params.with_dimension(s), ctx)
        offset = (1 + 2 * zeta2 * gamma ** 2) * ctx.fsum(p) / n - leading
        value = _clamp(offset + scores[best], leading, ctx, "S")
        z.append(zs)
        s_values.append(value)
        s_star_values.append(s_star_from_quantity(value, ctx))
        p = p * kernel_factor(n, params.alpha, gamma, zs, ctx) ** 2
        logger.debug(f"CBC-S n={n} s={s}: z_s={zs} S*={float(s_star_values[-1]):.6e}")
    seconds = time.perf_counter() - started
    gv = GeneratingVector(n, tuple(z))
    logger.info(f"CBC-S n={n} d={dmax} done in {seconds:.2f}s, S*={float(s_star_values[-1]):.6e}")
    return CbcResultS(gv, s_values, s_star_values, seconds)


# ---------------------------------------------------------
# P construction
# ---------------------------------------------------------


def cbc_p(n, dmax, params, ctx=None, workers=None):
    """CBC construction with the P-criterion, z_1 = 1."""
    ctx = ctx or precision(P_PRECISION_BITS)
    started = time.perf_counter()
    params = params.with_dimension(dmax)
    gammas = params.gammas(ctx)
    alpha = params.alpha
    candidates = units(n)
    # Columns for z and n - z coincide, so only z <= n/2 is evaluated
    representatives = [c for c in candidates if c <= n - c]

    k_column = kernel_factor(n, alpha, gammas[0], 1, ctx)
    m_column = m_factor(n, alpha, gammas[0], 1, ctx)
    try:
        t_values = [ratio_trace(m_column, k_column, ctx)]
    except SingularOperatorError as e:
        raise ConstructionError(f"CBC-P n={n} s=1: {e}") from e
    z = [1]
    diagnostics = []

    executor = ThreadPoolExecutor(max_workers=workers) if workers and workers > 1 else None
    try:
        for s in range(2, dmax + 1):
            gamma = gammas[s - 1]

            def evaluate(candidate):
                k_candidate = k_column * kernel_factor(n, alpha, gamma, candidate, ctx)
                m_candidate = m_column * m_factor(n, alpha, gamma, candidate, ctx)
                try:
                    return ratio_trace(m_candidate, k_candidate, ctx)
                except SingularOperatorError as e:
                    return e

            outcomes = list((executor.map if executor else map)(evaluate, representatives))
            scores = {}
            for candidate, outcome in zip(representatives, outcomes):
                if isinstance(outcome, SingularOperatorError):
                    diagnostics.append(f"s={s} z={candidate}: {outcome}")
                    logger.warning(f"CBC-P n={n} s={s}: skipping candidate {candidate}: {outcome}")
                    continue
                scores[candidate] = outcome
                scores[n - candidate] = outcome
            if not scores:
                raise ConstructionError(f"CBC-P n={n} s={s}: every candidate is singular")
            highest = max(scores.values())
            threshold = highest - ctx.tolerance() * abs(highest)
            best = min(c for c, value in scores.items() if value >= threshold)
            z.append(best)
            t_values.append(scores[best])
            k_column = k_column * kernel_factor(n, alpha, gamma, best, ctx)
            m_column = m_column * m_factor(n, alpha, gamma, best, ctx)
            logger.debug(f"CBC-P n={n} s={s}: z_s={best} T={float(scores[best]):.12e}")
    finally:
        if executor:
            executor.shutdown()

    diagonal = kernel_diagonal(params, ctx)
    value = ctx.sqrt(_clamp(diagonal - t_values[-1], diagonal, ctx, "P*^2"))
    seconds = time.perf_counter() - started
    logger.info(
        f"CBC-P n={n} d={dmax} at {ctx.mantissa_bits} bits done in {seconds:.2f}s, P*={float(value):.6e}"
    )
    return CbcResultP(GeneratingVector(n, tuple(z)), t_values, value, ctx.mantissa_bits, seconds, diagnostics)


# ---------------------------------------------------------
# Exhaustive reference
# ---------------------------------------------------------


def _select_min(candidates, values, tolerance):
    """Smallest candidate whose value is within tolerance of the minimum."""
    lowest = min(values)
    threshold = lowest + tolerance * abs(lowest)
    return next(c for c, v in zip(candidates, values) if v <= threshold)


def cbc_exhaustive_oracle(n, dmax, params, kind, ctx=None, budget=None):
    """
    Greedy reference: at each step evaluate the full criterion for every
    candidate (s_quantity for "S", the dense P* oracle for "P").
    The budget is checked before each candidate.
    """
    budget = budget or Budget()
    if n > EXHAUSTIVE_MAX_N or dmax > EXHAUSTIVE_MAX_D:
        raise BudgetExceededError(
            f"exhaustive CBC is limited to n <= {EXHAUSTIVE_MAX_N}, d <= {EXHAUSTIVE_MAX_D}"
        )
    if kind == "S":
        ctx = ctx or NATIVE
        criterion = s_quantity
    elif kind == "P":
        ctx = ctx or precision(P_PRECISION_BITS)
        criterion = p_oracle_dense
    else:
        raise ValueError(f"criterion kind must be 'S' or 'P', got {kind!r}")
    candidates = units(n)
    gv = None
    for s in range(1, dmax + 1):
        space = params.with_dimension(s)
        values = []
        for c in candidates:
            budget.check()
            trial = gv.extend(c) if gv else GeneratingVector(n, (c,))
            values.append(criterion(trial, space, ctx))
        best = _select_min(candidates, values, ctx.tolerance())
        gv = gv.extend(best) if gv else GeneratingVector(n, (best,))
    return gv
