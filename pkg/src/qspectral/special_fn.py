"""Charlier polynomials, the Kummer function and the Poisson measure.

Charlier polynomials C_n(x; a) obey

    a C_{n+1} + (x - n - a) C_n + n C_{n-1} = 0,

first kind from (C_{-1}, C_0) = (0, 1), second kind from
(C*_0, C*_1) = (0, -1/a).  The Stieltjes transform of the Poisson(a)
measure is the continued fraction

    chi0(z; a) = 1/(z + a - a/(z + a + 1 - 2a/(z + a + 2 - ...)))
               = Phi(1, 1 + z; -a) / z.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson

from .errors import ConvergenceError, DomainError

FIRST = "first"
SECOND = "second"

_RESCALE_AT = 2.0**400
_EXACT_MAX_DEGREE = 512
_TAIL_HEADROOM = 2.0**-10


@dataclass(frozen=True)
class CharlierParams:
    """Poisson / Charlier parameter ``a > 0``."""

    a: float

    def __post_init__(self):
        if not (isinstance(self.a, Real) and math.isfinite(self.a) and self.a > 0):
            raise DomainError(f"Charlier parameter must be a finite positive real, got {self.a!r}")


def _param(a) -> float:
    if isinstance(a, CharlierParams):
        return float(a.a)
    return float(CharlierParams(float(a)).a)


@dataclass(frozen=True)
class ScaledReal:
    """Overflow-safe real: ``mantissa * 2**exponent``.

    ``|mantissa|`` lies in [1, 2) or the value is exactly zero (mantissa 0,
    exponent 0).
    """

    mantissa: float
    exponent: int

    @classmethod
    def from_parts(cls, value: float, exponent: int = 0) -> "ScaledReal":
        if value == 0.0:
            return cls(0.0, 0)
        if not math.isfinite(value):
            raise DomainError("ScaledReal requires a finite value")
        m, e = math.frexp(value)  # |m| in [0.5, 1)
        return cls(2.0 * m, e - 1 + int(exponent))

    @classmethod
    def from_float(cls, value: float) -> "ScaledReal":
        return cls.from_parts(float(value))

    @classmethod
    def from_fraction(cls, value: Fraction) -> "ScaledReal":
        """Correctly rounded mantissa of an exact rational of any size."""
        if value == 0:
            return cls(0.0, 0)
        e = value.numerator.bit_length() - value.denominator.bit_length()
        scaled = value / (Fraction(2) ** e) if e >= 0 else value * (Fraction(2) ** -e)
        return cls.from_parts(float(scaled), e)

    def __float__(self) -> float:
        if self.mantissa == 0.0:
            return 0.0
        try:
            return math.ldexp(self.mantissa, self.exponent)
        except OverflowError:
            return math.copysign(math.inf, self.mantissa)

    @property
    def sign(self) -> int:
        return (self.mantissa > 0) - (self.mantissa < 0)

    def log2abs(self) -> float:
        if self.mantissa == 0.0:
            return -math.inf
        return math.log2(abs(self.mantissa)) + self.exponent

    def __mul__(self, other):
        if isinstance(other, ScaledReal):
            return ScaledReal.from_parts(self.mantissa * other.mantissa, self.exponent + other.exponent)
        return ScaledReal.from_parts(self.mantissa * float(other), self.exponent)

    __rmul__ = __mul__

    def __neg__(self):
        return ScaledReal(-self.mantissa, self.exponent)


def _check_finite(*values):
    for v in values:
        if not math.isfinite(v):
            raise DomainError(f"non-finite argument {v!r}")


def _three_term(n, step, start):
    """Run y_{j+1} = step(j, y_j, y_{j-1}) from ``start = (y_{j0-1}, y_{j0}, j0)``.

    Both iterates are rescaled by a common power of two whenever they grow
    large, so the result is exact up to rounding for very large n.
    """
    prev, cur, j = start
    exp2 = 0
    while j < n:
        prev, cur = cur, step(j, cur, prev)
        j += 1
        big = max(abs(cur), abs(prev))
        if big > _RESCALE_AT:
            _, e = math.frexp(big)
            prev = math.ldexp(prev, -e)
            cur = math.ldexp(cur, -e)
            exp2 += e
    return ScaledReal.from_parts(cur, exp2)


def charlier(n: int, x: float, a, kind: str = FIRST) -> ScaledReal:
    """Charlier polynomial C_n(x; a) (or C*_n for ``kind="second"``).

    Evaluated by forward recurrence; returned as a :class:`ScaledReal` so
    that very large n do not overflow.
    """
    a = _param(a)
    x = float(x)
    _check_finite(x)
    if n < 0:
        raise DomainError("degree must be nonnegative")

    if _is_nonneg_int(x) and n <= _EXACT_MAX_DEGREE and kind in (FIRST, SECOND):
        return _charlier_exact(n, int(x), a, kind)

    def step(j, c, cm1):
        return ((j + a - x) * c - j * cm1) / a

    if kind == FIRST:
        return _three_term(n, step, (0.0, 1.0, 0))
    if kind == SECOND:
        if n == 0:
            return ScaledReal(0.0, 0)
        return _three_term(n, step, (0.0, -1.0 / a, 1))
    raise DomainError(f"unknown kind {kind!r}")


def _charlier_exact(n, x, a, kind):
    """Same recurrence in exact rationals (a is a binary float, hence rational).

    Used at integer x, i.e. at the Poisson atoms, where values near a zero
    of C_n would otherwise lose relative accuracy.
    """
    a = Fraction(a)
    if kind == FIRST:
        prev, cur, j = Fraction(0), Fraction(1), 0
    else:
        if n == 0:
            return ScaledReal(0.0, 0)
        prev, cur, j = Fraction(0), -1 / a, 1
    while j < n:
        prev, cur = cur, ((j + a - x) * cur - j * prev) / a
        j += 1
    return ScaledReal.from_fraction(cur)


def charlier_table(nmax: int, x, a, kind: str = FIRST) -> np.ndarray:
    """C_0..C_nmax at every point of ``x`` as plain floats.

    Shape ``(nmax + 1,) + np.shape(x)``.  Vectorised companion of
    :func:`charlier` for moderate degrees.
    """
    a = _param(a)
    x = np.asarray(x, dtype=float)
    out = np.zeros((nmax + 1,) + x.shape)
    if kind == FIRST:
        out[0] = 1.0
        if nmax >= 1:
            out[1] = (a - x) / a
    elif kind == SECOND:
        if nmax >= 1:
            out[1] = -1.0 / a
    else:
        raise DomainError(f"unknown kind {kind!r}")
    for j in range(1, nmax):
        out[j + 1] = ((j + a - x) * out[j] - j * out[j - 1]) / a
    return out


def _is_nonneg_int(x) -> bool:
    return float(x).is_integer() and x >= 0


def charlier_egf(x: float, a, z: float) -> float:
    """Exponential generating function sum_n C_n(x; a) z**n / n! = e**z (1 - z/a)**x."""
    a = _param(a)
    _check_finite(x, z)
    base = 1.0 - z / a
    if _is_nonneg_int(x):
        return math.exp(z) * base ** int(x)
    if base <= 0.0:
        raise DomainError("z >= a requires a nonnegative integer x (real branch)")
    return math.exp(z + x * math.log(base))


def kummer_phi(alpha: float, beta: float, z: float, rtol: float = 1e-16, max_terms: int = 100_000) -> float:
    """Confluent hypergeometric series Phi(alpha, beta; z) = sum (alpha)_n/(beta)_n z**n/n!.

    Terms are added until ``|term| < rtol * |sum|`` once the terms have
    started to shrink.
    """
    _check_finite(alpha, beta, z)
    if float(beta).is_integer() and beta <= 0:
        raise DomainError("beta must not be a nonpositive integer")
    total = 1.0
    term = 1.0
    for n in range(max_terms):
        ratio = (alpha + n) / (beta + n) * z / (n + 1)
        term *= ratio
        total += term
        if term == 0.0 or (abs(term) < rtol * abs(total) and abs(ratio) < 1.0):
            return total
    raise ConvergenceError(f"Kummer series did not converge in {max_terms} terms", last_term=abs(term))


def chi0(z: float, a) -> float:
    """Stieltjes transform of the Poisson(a) measure at -z, i.e. Phi(1, 1+z; -a)/z.

    Uses Kummer's transformation Phi(1, 1+z; -a) = e**-a Phi(z, 1+z; a),
    whose series has positive terms only.
    """
    a = _param(a)
    _check_finite(z)
    if z <= 0:
        raise DomainError("chi0 needs z > 0 (Poisson atoms sit at z = 0, -1, -2, ...)")
    return math.exp(-a) * kummer_phi(z, 1.0 + z, a) / z


def chi0_convergent(z: float, a, depth: int) -> float:
    """Depth-``depth`` convergent -C*_K(-z; a) / C_K(-z; a) of the chi0 continued fraction."""
    num = charlier(depth, -z, a, SECOND)
    den = charlier(depth, -z, a, FIRST)
    return -float(num.mantissa / den.mantissa) * 2.0 ** (num.exponent - den.exponent)


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finite list of atoms plus an accounted-for remainder.

    ``tail_bound`` is the mass not carried by the listed atoms.  When a
    ``tail`` callable is attached, :meth:`integrate` adds the remainder's
    contribution to any smooth integrand instead of dropping it.
    """

    locations: np.ndarray
    masses: np.ndarray
    tail_bound: float = 0.0
    truncation_index: int = -1
    probability: bool = False
    tail: object = None

    def __post_init__(self):
        loc = np.array(self.locations, dtype=float)
        mass = np.array(self.masses, dtype=float)
        if loc.shape != mass.shape or loc.ndim != 1:
            raise DomainError("locations and masses must be 1-d arrays of equal length")
        if np.any(np.diff(loc) <= 0):
            raise DomainError("atom locations must be strictly increasing")
        if np.any(mass <= 0):
            raise DomainError("atom masses must be positive")
        if self.tail_bound < 0:
            raise DomainError("tail_bound must be nonnegative")
        loc.flags.writeable = False
        mass.flags.writeable = False
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "masses", mass)
        if self.probability:
            total = mass.sum() + self.tail_bound
            if abs(total - 1.0) > 1e-10:
                raise DomainError(f"probability measure has total mass {total!r}")

    def __len__(self):
        return len(self.masses)

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum() + self.tail_bound)

    def atoms(self):
        return list(zip(self.locations.tolist(), self.masses.tolist()))

    def integrate(self, f, include_tail: bool = True):
        """Integral of ``f`` against the measure.

        ``f`` receives the atom locations as a 1-d array and may return extra
        leading axes (e.g. one row per polynomial degree).
        """
        vals = np.asarray(f(self.locations), dtype=float)
        out = vals @ self.masses
        if include_tail and self.tail is not None:
            out = out + self.tail(f)
        return out


def poisson_measure(a, tol: float = 1e-14, min_atoms: int = 0) -> DiscreteMeasure:
    """Poisson(a) measure on {0..M}.

    M is the first index whose upper tail is below ``tol * 2**-10``; the
    extra margin keeps the truncation error of polynomial integrands (which
    multiply the dropped mass) below ``tol``.  ``tail_bound`` is the exact
    dropped mass.
    """
    a = _param(a)
    if not 0.0 < tol < 1.0:
        raise DomainError("tol must lie in (0, 1)")
    M = int(a)
    # headroom: integrands (polynomials) multiply the dropped mass
    while poisson.sf(M, a) >= tol * _TAIL_HEADROOM:
        M += 1
    M = max(M, min_atoms - 1)
    n = np.arange(M + 1, dtype=float)
    masses = np.exp(n * math.log(a) - a - gammaln(n + 1.0))
    keep = masses > 0
    n, masses = n[keep], masses[keep]
    return DiscreteMeasure(
        n, masses, tail_bound=float(poisson.sf(M, a)), truncation_index=M, probability=True
    )


def charlier_stieltjes(m: int, z: float, a) -> float:
    """int C_m(x; a) / (z + x) dP_a(x) = C_m(-z; a) chi0(z; a) + C*_m(-z; a).

    The right-hand side is the minimal solution of the Charlier recurrence
    at x = -z, so it is evaluated without cancellation as chi0 times the
    ratios y_n / y_{n-1} = n / (n + a + z - a y_{n+1}/y_n), obtained by
    backward recurrence from a depth that doubles until the value settles.
    """
    a = _param(a)
    _check_finite(z)
    if m < 0:
        raise DomainError("degree must be nonnegative")
    base = chi0(z, a)
    if m == 0:
        return base
    prev = None
    depth = m + 64 + int(4 * (a + z))
    while True:
        t = 0.0
        ratios = np.empty(depth + 1)
        for n in range(depth, 0, -1):
            t = n / (n + a + z - a * t)
            ratios[n] = t
        val = base * float(np.prod(ratios[1 : m + 1]))
        if prev is not None and abs(val - prev) <= 1e-16 * abs(val):
            return val
        if depth > 1 << 20:
            raise ConvergenceError("backward recurrence did not settle", last_term=abs(val - prev))
        prev, depth = val, 2 * depth
