"""
Symmetric-circulant linear algebra over a configurable-precision scalar.

Every quantity in the package is computed either with native doubles
(numpy float64/complex128 arrays) or with mpmath software floats held in numpy
object arrays. A :class:`PrecisionContext` selects the representation and
carries its own ``mpmath.MPContext`` so that contexts of different precision
never share global state.
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache

import mpmath
import numpy as np
import scipy.linalg

logger = logging.getLogger(__name__)

NATIVE_BITS = 53


class PrecisionLossError(ArithmeticError):
    pass


class SingularOperatorError(ArithmeticError):
    pass


@dataclass(frozen=True)
class PrecisionContext:
    mantissa_bits: int = NATIVE_BITS

    def __post_init__(self):
        if self.mantissa_bits < NATIVE_BITS:
            raise ValueError(
                f"mantissa_bits must be at least {NATIVE_BITS}, got {self.mantissa_bits}"
            )

    @property
    def is_native(self):
        return self.mantissa_bits == NATIVE_BITS

    @cached_property
    def mp(self):
        context = mpmath.MPContext()
        context.prec = self.mantissa_bits
        return context

    @cached_property
    def pi(self):
        return math.pi if self.is_native else +self.mp.pi

    def convert(self, value):
        """Scalar at this precision from an int, float, str or Fraction."""
        if self.is_native:
            return float(value)
        if isinstance(value, Fraction):
            return self.mp.mpf(value.numerator) / value.denominator
        return self.mp.mpf(value)

    def asarray(self, values):
        if self.is_native:
            return np.asarray(values, dtype=np.float64)
        return np.array([self.convert(v) for v in values], dtype=object)

    def ones(self, n):
        if self.is_native:
            return np.ones(n)
        return np.array([self.mp.one] * n, dtype=object)

    def fraction(self, residue, n):
        if self.is_native:
            return int(residue) / n
        return self.mp.mpf(int(residue)) / n

    def fractions(self, residues, n):
        """Exact integer residues divided by n, rounded once at this precision."""
        residues = np.asarray(residues)
        if self.is_native:
            return residues / n
        return np.array([self.mp.mpf(int(r)) / n for r in residues.ravel()], dtype=object).reshape(
            residues.shape
        )

    def tolerance(self, slack=20):
        """2^-(mantissa_bits - slack), the precision-scaled tolerance family."""
        return self.convert(Fraction(1, 2 ** (self.mantissa_bits - slack)))

    def sqrt(self, value):
        return math.sqrt(value) if self.is_native else self.mp.sqrt(value)

    def fsum(self, values):
        return math.fsum(values) if self.is_native else self.mp.fsum(values)

    def real(self, values):
        if self.is_native:
            return np.real(values)
        return np.array([v.real for v in values], dtype=object)

    def imag(self, values):
        if self.is_native:
            return np.imag(values)
        return np.array([v.imag for v in values], dtype=object)

    def roots_of_unity(self, n, sign=-1):
        """exp(sign * 2 pi i k / n) for k = 0..n-1."""
        if self.is_native:
            return np.exp(sign * 2j * np.pi * np.arange(n) / n)
        mp = self.mp
        return np.array(
            [mp.mpc(mp.cospi(mp.mpf(2 * k) / n), sign * mp.sinpi(mp.mpf(2 * k) / n)) for k in range(n)],
            dtype=object,
        )


NATIVE = PrecisionContext()


@lru_cache(maxsize=None)
def precision(bits):
    """Shared context for a given number of mantissa bits."""
    return NATIVE if bits == NATIVE_BITS else PrecisionContext(bits)


# ---------------------------------------------------------
# Discrete Fourier transform
# ---------------------------------------------------------


class BaseFFT:
    """
    Base class for a length-n discrete Fourier transform.
    Subclasses decide how the transform is carried out for a given context.
    """

    def __init__(self, n, ctx):
        if n < 1:
            raise ValueError(f"transform length must be positive, got {n}")
        self.n = n
        self.ctx = ctx
        self._initialize()

    def _initialize(self):
        # Subclasses override this method to compute roots of unity.
        pass

    def fft(self, values):
        raise NotImplementedError

    def ifft(self, values):
        raise NotImplementedError


class DoubleFFT(BaseFFT):
    """numpy.fft in native double precision, any length."""

    def fft(self, values):
        return np.fft.fft(np.asarray(values), axis=-1)

    def ifft(self, values):
        return np.fft.ifft(np.asarray(values), axis=-1)


class MultiPrecisionFFT(BaseFFT):
    """
    Bare bones transform on mpmath numbers.
    Power-of-two lengths use a recursive radix-2 FFT, other lengths the direct sum.
    """

    def _initialize(self):
        # The FFT world orients the unit circle clockwise.
        self.zhat = self.ctx.roots_of_unity(self.n, sign=-1)
        self.izhat = self.ctx.roots_of_unity(self.n, sign=1)
        self.radix2 = self.n & (self.n - 1) == 0
        if not self.radix2:
            grid = np.arange(self.n)
            self.exponents = np.outer(grid, grid) % self.n

    def _fft(self, values, zhat):
        k = len(values)
        if k == 1:
            return values.copy()
        stride = self.n // k
        even = self._fft(values[0:k:2], zhat)
        odd = self._fft(values[1:k:2], zhat) * zhat[0:self.n // 2:stride]
        result = np.empty(k, dtype=object)
        result[:k // 2] = even + odd
        result[k // 2:] = even - odd
        return result

    def _dft(self, values, zhat):
        return np.array([np.dot(values, zhat[row]) for row in self.exponents], dtype=object)

    def _transform(self, values, zhat):
        values = np.asarray(values, dtype=object)
        if self.radix2:
            return self._fft(values, zhat)
        return self._dft(values, zhat)

    def fft(self, values):
        return self._transform(values, self.zhat)

    def ifft(self, values):
        return self._transform(values, self.izhat) / self.n


@lru_cache(maxsize=128)
def get_fft(n, ctx=NATIVE):
    """Transform of length n for ctx, twiddle factors cached per (n, ctx)."""
    return DoubleFFT(n, ctx) if ctx.is_native else MultiPrecisionFFT(n, ctx)


def dft(values, ctx=NATIVE):
    return get_fft(len(values), ctx).fft(values)


def idft(values, ctx=NATIVE):
    return get_fft(len(values), ctx).ifft(values)


# ---------------------------------------------------------
# Circulant operators
# ---------------------------------------------------------


class CirculantOperator:
    """
    n x n circulant matrix C with C[l, k] = first_column[(l - k) % n].
    The spectrum is computed once at construction, the operator is immutable afterwards.
    """

    def __init__(self, first_column, ctx=NATIVE):
        self.ctx = ctx
        self.first_column = ctx.asarray(first_column).copy()
        self.first_column.flags.writeable = False
        self.n = len(self.first_column)
        if self.n < 1:
            raise ValueError("a circulant operator needs a non-empty first column")
        self.spectrum = dft(self.first_column, ctx)
        self._eigenvalues = None

    @cached_property
    def norm1(self):
        return self.ctx.fsum(abs(c) for c in self.first_column)

    @property
    def tolerance(self):
        return self.ctx.tolerance() * self.norm1

    def eigenvalues(self):
        """Real eigenvalues of a symmetric circulant, checked against the imaginary residue."""
        if self._eigenvalues is None:
            residue = max(abs(v) for v in self.ctx.imag(self.spectrum))
            if residue > self.tolerance:
                raise PrecisionLossError(
                    f"imaginary spectrum residue {float(residue):.3e} exceeds tolerance "
                    f"{float(self.tolerance):.3e} at {self.ctx.mantissa_bits} bits"
                )
            eigenvalues = self.ctx.real(self.spectrum)
            eigenvalues.flags.writeable = False
            self._eigenvalues = eigenvalues
        return self._eigenvalues

    def singular_threshold(self, eigenvalues):
        """n 2^-(bits-4) max|lambda|: relative to the spectrum, not to the first column."""
        return self.n * self.ctx.tolerance(slack=4) * max(abs(v) for v in eigenvalues)

    def check_nonsingular(self, assume_spd=False):
        eigenvalues = self.eigenvalues()
        smallest = min(abs(v) for v in eigenvalues)
        if smallest <= self.singular_threshold(eigenvalues):
            raise SingularOperatorError(
                f"circulant operator of size {self.n} is singular at {self.ctx.mantissa_bits} bits "
                f"(smallest |eigenvalue| {float(smallest):.3e})"
            )
        if assume_spd and min(eigenvalues) <= 0:
            logger.warning(f"Circulant operator of size {self.n} is not positive definite")
        return eigenvalues

    def solve(self, rhs, assume_spd=False):
        """x with C x = rhs. rhs may be a vector or (native only) a stack of row vectors."""
        eigenvalues = self.check_nonsingular(assume_spd)
        fft = get_fft(self.n, self.ctx)
        if self.ctx.is_native:
            return np.real(fft.ifft(fft.fft(rhs) / eigenvalues))
        rhs = self.ctx.asarray(rhs)
        return self.ctx.real(fft.ifft(fft.fft(rhs) / eigenvalues))

    def matvec(self, x):
        fft = get_fft(self.n, self.ctx)
        product = fft.ifft(fft.fft(self.ctx.asarray(x)) * self.spectrum)
        return self.ctx.real(product)

    def dense(self):
        if self.ctx.is_native:
            return scipy.linalg.circulant(self.first_column)
        grid = np.arange(self.n)
        return self.first_column[(grid[:, None] - grid[None, :]) % self.n]


def circulant_eigenvalues(operator):
    return operator.eigenvalues()


def circulant_solve(operator, rhs, assume_spd=False):
    return operator.solve(rhs, assume_spd=assume_spd)


def ratio_trace(m_column, k_column, ctx=NATIVE):
    """tr(K^-1 M) = sum_l m_hat_l / k_hat_l for symmetric circulants K and M."""
    if len(m_column) != len(k_column):
        raise ValueError(f"column lengths differ: {len(m_column)} != {len(k_column)}")
    k_hat = CirculantOperator(k_column, ctx).check_nonsingular()
    m_hat = CirculantOperator(m_column, ctx).eigenvalues()
    return ctx.fsum(m_hat / k_hat)


# ---------------------------------------------------------
# Dense references for small n
# ---------------------------------------------------------


def dense_solve(matrix, rhs, ctx=NATIVE):
    try:
        if ctx.is_native:
            return scipy.linalg.solve(np.asarray(matrix, dtype=np.float64), np.asarray(rhs, dtype=np.float64))
        mp = ctx.mp
        solution = mp.lu_solve(mp.matrix(np.asarray(matrix).tolist()), mp.matrix(list(rhs)))
        return np.array([solution[i] for i in range(len(rhs))], dtype=object)
    except (np.linalg.LinAlgError, ZeroDivisionError) as e:
        raise SingularOperatorError(f"dense solve failed: {e}") from e


def dense_ratio_trace(m_matrix, k_matrix, ctx=NATIVE):
    """tr(K^-1 M) by dense factorization."""
    try:
        if ctx.is_native:
            product = scipy.linalg.solve(np.asarray(k_matrix, dtype=np.float64), np.asarray(m_matrix, dtype=np.float64))
            return math.fsum(np.diag(product))
        mp = ctx.mp
        product = mp.inverse(mp.matrix(np.asarray(k_matrix).tolist())) * mp.matrix(np.asarray(m_matrix).tolist())
        return mp.fsum(product[i, i] for i in range(product.rows))
    except (np.linalg.LinAlgError, ZeroDivisionError) as e:
        raise SingularOperatorError(f"dense factorization failed: {e}") from e
