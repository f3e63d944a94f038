"""Orthogonal polynomials and spectral measure of the absorbed M/M/inf chain.

The embedded chain observed until an exponential(sigma) clock rings has
the sub-stochastic tridiagonal transition matrix A(sigma) with

    a[n, n+1] = rho / (n + sigma + rho),   a[n, n-1] = n / (n + sigma + rho).

Its eigenvector components P_n(sigma; x) satisfy

    rho P_{n+1} - (n + sigma + rho) x P_n + n P_{n-1} = 0,

and the spectral measure has atoms at +-sqrt(rho / (sigma + rho + k)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln

from . import _tails
from .errors import DomainError, PoleError
from .special_fn import FIRST, SECOND, DiscreteMeasure, ScaledReal, _three_term, chi0, kummer_phi

__all__ = [
    "QueueParams",
    "DiscreteMeasure",
    "p_poly",
    "p_table",
    "pi_weight",
    "atom_mass",
    "mminf_spectral_measure",
    "chi_sigma",
    "chi_sigma_kummer",
    "stieltjes_p",
    "p_egf",
]

POLE_DISTANCE = 1e-9
MAX_ATOM_INDEX = 100_000


@dataclass(frozen=True)
class QueueParams:
    """Arrival rate ``rho``, observer rate ``sigma`` and optional capacity ``c``.

    ``capacity=None`` means infinitely many servers.  ``capacity=0`` is
    accepted and treated by :mod:`qspectral.finite_capacity` as the
    degenerate always-blocking system.
    """

    rho: float
    sigma: float = 1.0
    capacity: Optional[int] = None

    def __post_init__(self):
        for name in ("rho", "sigma"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be a finite positive real, got {v!r}")
        if self.capacity is not None:
            if int(self.capacity) != self.capacity or self.capacity < 0:
                raise DomainError(f"capacity must be a nonnegative integer, got {self.capacity!r}")
            object.__setattr__(self, "capacity", int(self.capacity))

    @property
    def alpha(self) -> float:
        """sigma + rho, the total event rate in the empty state."""
        return self.sigma + self.rho

    def with_capacity(self, c):
        return QueueParams(self.rho, self.sigma, c)


def p_poly(n: int, params: QueueParams, x: float, kind: str = FIRST) -> ScaledReal:
    """P_n(sigma; x) (``kind="first"``) or P*_n(sigma; x) (``kind="second"``)."""
    if n < 0:
        raise DomainError("degree must be nonnegative")
    rho, alpha = params.rho, params.alpha
    x = float(x)

    def step(j, p, pm1):
        return ((j + alpha) * x * p - j * pm1) / rho

    if kind == FIRST:
        return _three_term(n, step, (0.0, 1.0, 0))
    if kind == SECOND:
        if n == 0:
            return ScaledReal(0.0, 0)
        return _three_term(n, step, (0.0, alpha / rho, 1))
    raise DomainError(f"unknown kind {kind!r}")


def p_table(nmax: int, params: QueueParams, x, kind: str = FIRST) -> np.ndarray:
    """P_0..P_nmax (or P*) at every point of ``x``; shape ``(nmax+1,) + shape(x)``."""
    rho, alpha = params.rho, params.alpha
    x = np.asarray(x, dtype=float)
    out = np.zeros((nmax + 1,) + x.shape)
    if kind == FIRST:
        out[0] = 1.0
        if nmax >= 1:
            out[1] = alpha * x / rho
    elif kind == SECOND:
        if nmax >= 1:
            out[1] = alpha / rho
    else:
        raise DomainError(f"unknown kind {kind!r}")
    for j in range(1, nmax):
        out[j + 1] = ((j + alpha) * x * out[j] - j * out[j - 1]) / rho
    return out


def pi_weight(n: int, params: QueueParams) -> float:
    """Reversibility weight pi_n = (sigma+rho+n)/(sigma+rho) * rho**n / n!."""
    if n < 0:
        raise DomainError("index must be nonnegative")
    alpha = params.alpha
    return (alpha + n) / alpha * math.exp(n * math.log(params.rho) - gammaln(n + 1.0))


def atom_location(k, params: QueueParams):
    return np.sqrt(params.rho / (params.alpha + np.asarray(k, dtype=float)))


def atom_mass(k, params: QueueParams):
    """Mass r_k at each of the two atoms +-s_k; valid for real k >= 0."""
    alpha = params.alpha
    k = np.asarray(k, dtype=float)
    return alpha / (2.0 * (alpha + k)) * _tails.abel_weight(k, alpha)


def _default_head(params: QueueParams) -> int:
    return int(max(256, 32 * math.ceil(params.alpha)))


def _tail_summand(params, f):
    def F(k):
        s = atom_location(k, params)
        r = atom_mass(k, params)
        return (np.asarray(f(s), dtype=float) + np.asarray(f(-s), dtype=float)) * r

    return F


def mminf_spectral_measure(params: QueueParams, tol: float = 1e-14, min_index: int = 0) -> DiscreteMeasure:
    """Spectral measure d psi(sigma; x) of A(sigma).

    Atoms +-s_k for k = 0..K are listed explicitly.  The masses decay only
    like k**-1.5, so the remaining atoms (all inside (-s_K, s_K)) are kept
    as a smooth remainder: ``tail_bound`` is their total mass and
    :meth:`DiscreteMeasure.integrate` adds their contribution for smooth
    integrands by Euler-Maclaurin summation over k.

    K starts at ``max(256, 32*(sigma+rho), min_index)`` and doubles until
    the total mass computed with K and 2K head atoms agrees within ``tol``.
    """
    if not 0.0 < tol < 1.0:
        raise DomainError("tol must lie in (0, 1)")
    head = max(_default_head(params), int(min_index) + 1)
    if head > MAX_ATOM_INDEX:
        from .errors import ConvergenceError

        raise ConvergenceError(f"atom index {head} exceeds {MAX_ATOM_INDEX}")
    total, K, tail_mass, _ = _tails.head_plus_tail(
        lambda k: 2.0 * atom_mass(k, params), head, tol=tol, max_head=MAX_ATOM_INDEX
    )
    k = np.arange(K, dtype=float)
    s = atom_location(k, params)
    r = atom_mass(k, params)
    locations = np.concatenate([-s, s[::-1]])
    masses = np.concatenate([r, r[::-1]])

    def tail(f):
        return _tails.euler_maclaurin_tail(_tail_summand(params, f), K)

    return DiscreteMeasure(
        locations,
        masses,
        tail_bound=float(tail_mass),
        truncation_index=K - 1,
        probability=True,
        tail=tail,
    )


def _check_pole(measure: DiscreteMeasure, z: float):
    if np.min(np.abs(measure.locations - z)) < POLE_DISTANCE:
        raise PoleError(f"z={z!r} lies within {POLE_DISTANCE:g} of an atom")


def _measure_for(params: QueueParams, z: float) -> DiscreteMeasure:
    """Measure whose unlisted atoms stay below |z|/2, so tail integrands are smooth."""
    if z == 0.0:
        raise PoleError("z = 0 is the accumulation point of the atoms")
    need = math.ceil(4.0 * params.rho / (z * z) - params.alpha)
    if need > MAX_ATOM_INDEX:
        raise PoleError(f"|z|={abs(z):g} is too close to the accumulation point 0")
    measure = mminf_spectral_measure(params, min_index=max(need, 0))
    _check_pole(measure, z)
    return measure


def chi_sigma(params: QueueParams, z: float) -> float:
    """Stieltjes transform int d psi(sigma; x) / (z - x), summed over atoms."""
    z = float(z)
    measure = _measure_for(params, z)
    return float(measure.integrate(lambda x: 1.0 / (z - x)))


def chi_sigma_kummer(params: QueueParams, z: float) -> float:
    """Closed form (sigma+rho)/(z b) Phi(1, b+1; -rho/z**2), b = sigma+rho-rho/z**2.

    At z = 1 this equals (sigma+rho) chi0(sigma; rho).  For |z| above the
    largest atom, b > 0 and the positive-term form via :func:`chi0` is used.
    """
    z = float(z)
    c = params.rho / (z * z)
    b = params.alpha - c
    if b > 0:
        return params.alpha / z * chi0(b, c)
    return params.alpha / (z * b) * kummer_phi(1.0, b + 1.0, -c)


def stieltjes_p(m: int, params: QueueParams, z: float) -> float:
    """int P_m(sigma; x) / (z - x) d psi = P_m(z) chi(sigma; z) - P*_m(z)."""
    p = float(p_poly(m, params, z, FIRST))
    ps = float(p_poly(m, params, z, SECOND))
    return p * chi_sigma(params, z) - ps


def p_egf(params: QueueParams, x: float, z: float) -> float:
    """sum_n P_n(sigma; x) z**n / n! = e**(z/x) (1 - z x / rho)**(rho/x**2 - sigma - rho)."""
    x, z = float(x), float(z)
    if x == 0.0:
        raise DomainError("x must be nonzero")
    base = 1.0 - z * x / params.rho
    if base <= 0.0:
        raise DomainError("need z*x < rho")
    return math.exp(z / x + (params.rho / (x * x) - params.alpha) * math.log(base))
