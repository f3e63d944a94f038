"""Transient laws of the initially empty M/M/inf queue.

Two frames are covered:

* observer frame: an exponential(sigma) observer stays in the system;
  nu = queue length when it leaves, a / d = arrivals / departures seen,
  kappa = number of events including the observer's exit;
* fixed-time frame: N(t), D(t), K(t) over (0, t).

Convention: K(t) = arrivals + departures + 1, mirroring kappa, whose
generating function carries the factor z of the exit event.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate
from scipy.special import gammaln
from scipy.stats import binom, poisson

from . import _tails
from .errors import DomainError
from .special_fn import charlier_table, kummer_phi, poisson_measure
from .spectral_core import QueueParams, mminf_spectral_measure, p_table

METHODS = ("spectral", "closed_form", "gf_extraction", "oracle", "simulation", "kummer", "series")


@dataclass(frozen=True)
class Pmf:
    """Probability mass function on 0..len(values)-1.

    ``tail_bound`` is the probability of outcomes beyond the listed support;
    for a complete law ``sum(values) + tail_bound`` is one.
    """

    values: np.ndarray
    tail_bound: float = 0.0
    method: str = "closed_form"
    complete: bool = True

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        if np.any(vals < -1e-12) or np.any(vals > 1 + 1e-12):
            raise DomainError("pmf values must lie in [0, 1]")
        if self.complete and abs(vals.sum() + self.tail_bound - 1.0) > 1e-9:
            raise DomainError(f"pmf total {vals.sum() + self.tail_bound!r} differs from 1")

    @property
    def kmax(self) -> int:
        return len(self.values) - 1

    def mean(self) -> float:
        return float(np.arange(len(self.values)) @ self.values)

    def __getitem__(self, k):
        return self.values[k]

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class MomentSet:
    mean: float
    second_moment: Optional[float] = None
    source: str = "closed_form"

    def __post_init__(self):
        if self.second_moment is not None and self.second_moment < self.mean**2 - 1e-12:
            raise DomainError("second moment below squared mean")

    @property
    def variance(self) -> Optional[float]:
        if self.second_moment is None:
            return None
        return self.second_moment - self.mean**2


# -- observer frame: nu ------------------------------------------------------


def _log_rho_pow(m, rho):
    m = np.asarray(m, dtype=float)
    return m * math.log(rho) - gammaln(m + 1.0)


def nu_values(mmax: int, params: QueueParams, method: str = "spectral") -> np.ndarray:
    """P(nu = m) for m = 0..mmax.

    ``spectral``: (sigma/(sigma+rho)) rho**m/m! int P_m(x)/(1-x) d psi(x).
    ``kummer``:   sigma rho**m/m! int C_m(x; rho)/(sigma+x) dP_rho(x).
    """
    rho, sigma = params.rho, params.sigma
    scale = np.exp(_log_rho_pow(np.arange(mmax + 1), rho))
    if method == "spectral":
        measure = mminf_spectral_measure(params)
        ints = measure.integrate(lambda x: p_table(mmax, params, x) / (1.0 - x))
        return np.maximum(sigma / params.alpha * scale * ints, 0.0)
    if method == "kummer":
        measure = poisson_measure(rho, tol=1e-30, min_atoms=2 * mmax + 40)
        ints = measure.integrate(lambda x: charlier_table(mmax, x, rho) / (sigma + x))
        return np.maximum(sigma * scale * ints, 0.0)
    raise DomainError(f"unknown method {method!r}")


def nu_pmf(m: int, params: QueueParams, method: str = "spectral") -> float:
    if m < 0:
        raise DomainError("m must be nonnegative")
    return float(nu_values(m, params, method)[m])


def _complete(values, method, exact_tail=None):
    values = np.clip(values, 0.0, None)
    tail = exact_tail if exact_tail is not None else max(0.0, 1.0 - float(values.sum()))
    return Pmf(values, tail_bound=tail, method=method)


def nu_law(params: QueueParams, mmax: int, method: str = "spectral") -> Pmf:
    return _complete(nu_values(mmax, params, method), method)


# -- fixed time: N(t) --------------------------------------------------------


def nt_values(mmax: int, rho: float, t: float, method: str = "closed_form") -> np.ndarray:
    """P(N(t) = m | N(0) = 0) for m = 0..mmax.

    ``closed_form`` is the Poisson(rho (1 - e**-t)) law; ``spectral`` sums
    rho**m/m! sum_n C_m(n; rho) e**(-n t) rho**n e**-rho / n!.
    """
    if t < 0:
        raise DomainError("t must be nonnegative")
    QueueParams(rho)
    m = np.arange(mmax + 1)
    if method == "closed_form":
        return poisson.pmf(m, -rho * math.expm1(-t))
    if method == "spectral":
        measure = poisson_measure(rho, tol=1e-30, min_atoms=2 * mmax + int(rho) + 40)
        ints = measure.integrate(lambda x: charlier_table(mmax, x, rho) * np.exp(-x * t))
        return np.maximum(np.exp(_log_rho_pow(m, rho)) * ints, 0.0)
    raise DomainError(f"unknown method {method!r}")


def nt_pmf(m: int, rho: float, t: float, method: str = "closed_form") -> float:
    if m < 0:
        raise DomainError("m must be nonnegative")
    return float(nt_values(m, rho, t, method)[m])


def nt_law(rho: float, t: float, mmax: int, method: str = "closed_form") -> Pmf:
    mean = -rho * math.expm1(-t)
    return _complete(nt_values(mmax, rho, t, method), method, float(poisson.sf(mmax, mean)))


# -- kappa and K(t) ----------------------------------------------------------


def kappa_gf(z: float, params: QueueParams, rtol: float = 1e-15) -> float:
    """E z**kappa = sigma z e**(rho z(1-z)) sum_n (sigma+rho+n-rho z**2)**-1 (-rho z(1-z))**n / n!."""
    rho, sigma, alpha = params.rho, params.sigma, params.alpha
    if rho * z * z >= alpha:
        raise DomainError("need rho z**2 < sigma + rho (|z| <= 1 always qualifies)")
    y = -rho * z * (1.0 - z)
    total, term, n = 0.0, 1.0, 0
    while True:
        contrib = term / (sigma + rho * (1.0 - z * z) + n)
        total += contrib
        if n > abs(y) and abs(contrib) <= rtol * abs(total):
            break
        n += 1
        term *= y / n
    return sigma * z * math.exp(rho * z * (1.0 - z)) * total


def kappa_law(params: QueueParams, kmax: Optional[int] = None, tol: float = 1e-14) -> Pmf:
    """Law of kappa from the truncated absorbed chain (exact sparse matrix powers)."""
    from .oracles import TruncatedChain, joint_kappa_nu

    table = joint_kappa_nu(TruncatedChain.for_params(params), kmax, tol=tol)
    values = table.sum(axis=1)
    return _complete(values, "oracle")


def kt_gf(z: float, rho: float, t: float) -> float:
    """E z**K(t) = z exp(rho z(1-z)(1-e**-t) - rho(1-z**2) t)."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    return z * math.exp(-rho * z * (1.0 - z) * math.expm1(-t) - rho * (1.0 - z * z) * t)


def _kt_rates(rho, t):
    a = -rho * math.expm1(-t)
    b = rho * (t + math.expm1(-t))
    return a, max(b, 0.0)


def kt_values(kmax: int, rho: float, t: float) -> np.ndarray:
    """P(K(t) = k) for k = 0..kmax.

    K(t) - 1 = N' + 2 D' with N' ~ Poisson(rho(1-e**-t)) and
    D' ~ Poisson(rho(t-1+e**-t)) independent; all terms are nonnegative.
    """
    if t < 0:
        raise DomainError("t must be nonnegative")
    a, b = _kt_rates(rho, t)
    out = np.zeros(kmax + 1)
    if kmax < 1:
        return out
    j = np.arange(kmax // 2 + 1)
    pn = poisson.pmf(np.arange(kmax), a)
    pd = poisson.pmf(j, b)
    for k in range(1, kmax + 1):
        jj = j[2 * j <= k - 1]
        out[k] = float(pd[jj] @ pn[k - 1 - 2 * jj])
    return out


def kt_pmf(k: int, rho: float, t: float) -> float:
    """P(K(t) = k); zero for k = 0 since the exit event is always counted."""
    if k < 1:
        return 0.0
    return float(kt_values(k, rho, t)[k])


def kt_law(rho: float, t: float, kmax: int) -> Pmf:
    return _complete(kt_values(kmax, rho, t), "closed_form")


# -- departures ---------------------------------------------------------------


def _d_head(sigma, rho):
    return int(max(256, 32 * math.ceil(sigma + rho)))


def d_gf(z: float, params: QueueParams, method: str = "series") -> float:
    """E z**d for the departures seen by the observer.

    ``series``: sigma sum_n (sigma+n)**n e**-(sigma+n)/n! / (sigma+rho+n-rho z);
    the terms decay like n**-1.5 so the remainder is summed by
    Euler-Maclaurin.  ``kummer``: sigma/(sigma+rho(1-z)) Phi(1, sigma+rho(1-z)+1; rho(1-z)).
    """
    rho, sigma = params.rho, params.sigma
    if z < -1 or sigma + rho * (1.0 - z) <= 0:
        raise DomainError("need -1 <= z < 1 + sigma/rho")
    if method == "series":
        shift = sigma + rho * (1.0 - z)

        def f(n):
            return _tails.abel_weight(n, sigma) / (shift + n)

        total = _tails.head_plus_tail(f, _d_head(sigma, rho), tol=1e-15)[0]
        return float(sigma * total)
    if method == "kummer":
        y = rho * (1.0 - z)
        return sigma / (sigma + y) * kummer_phi(1.0, sigma + y + 1.0, y)
    raise DomainError(f"unknown method {method!r}")


def d_values(kmax: int, params: QueueParams) -> np.ndarray:
    """P(d = k) = sigma sum_n w_n rho**k / (sigma+rho+n)**(k+1), k = 0..kmax."""
    rho, sigma, alpha = params.rho, params.sigma, params.alpha
    ks = np.arange(kmax + 1, dtype=float)[:, None]

    def f(n):
        n = np.asarray(n, dtype=float)
        logw = _tails.log_abel_weight(n, sigma)
        return np.exp(logw + ks * math.log(rho) - (ks + 1.0) * np.log(alpha + n))

    return sigma * _tails.head_plus_tail(f, _d_head(sigma, rho), tol=1e-15)[0]


def d_pmf(k: int, params: QueueParams) -> float:
    if k < 0:
        raise DomainError("k must be nonnegative")
    return float(d_values(k, params)[k])


def d_law(params: QueueParams, kmax: int) -> Pmf:
    return _complete(d_values(kmax, params), "spectral")


def dt_gf(z, rho: float, t: float):
    """E z**D(t) = exp(rho (1-z)(1 - e**-t - t)); accepts complex z."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    return np.exp(-rho * (1.0 - np.asarray(z)) * (t + math.expm1(-t)))


def dt_values(kmax: int, rho: float, t: float, method: str = "closed_form") -> np.ndarray:
    """P(D(t) = k), k = 0..kmax.

    ``closed_form``: Poisson(rho (t - 1 + e**-t)).  ``gf``: Cauchy
    coefficient extraction (FFT on the unit circle) from :func:`dt_gf`.
    """
    if t < 0:
        raise DomainError("t must be nonnegative")
    mean = rho * (t + math.expm1(-t))
    k = np.arange(kmax + 1)
    if method == "closed_form":
        return poisson.pmf(k, max(mean, 0.0))
    if method == "gf":
        n = 1 << max(8, int(math.ceil(math.log2(kmax + 1 + mean + 40 * math.sqrt(mean + 1)))) + 1)
        w = np.exp(2j * np.pi * np.arange(n) / n)
        coeffs = np.fft.fft(dt_gf(w, rho, t)).real / n
        return np.clip(coeffs[: kmax + 1], 0.0, None)
    raise DomainError(f"unknown method {method!r}")


def dt_pmf(k: int, rho: float, t: float, method: str = "closed_form") -> float:
    if k < 0:
        raise DomainError("k must be nonnegative")
    return float(dt_values(k, rho, t, method)[k])


def dt_law(rho: float, t: float, kmax: int, method: str = "closed_form") -> Pmf:
    mean = rho * (t + math.expm1(-t))
    tag = "gf_extraction" if method == "gf" else method
    return _complete(dt_values(kmax, rho, t, method), tag, float(poisson.sf(kmax, max(mean, 0.0))))


# -- arrivals, M/G/inf, initial customers -----------------------------------


def arrivals_pmf(m: int, params: QueueParams) -> float:
    """P(a = m) = sigma rho**m / (rho + sigma)**(m+1)."""
    if m < 0:
        raise DomainError("m must be nonnegative")
    rho, sigma = params.rho, params.sigma
    return math.exp(math.log(sigma) + m * math.log(rho) - (m + 1) * math.log(rho + sigma))


def arrivals_law(params: QueueParams, mmax: int) -> Pmf:
    values = np.array([arrivals_pmf(m, params) for m in range(mmax + 1)])
    tail = (params.rho / params.alpha) ** (mmax + 1)
    return Pmf(values, tail_bound=tail, method="closed_form")


def departure_probability(t: float, service_cdf: Callable[[float], float], points=None) -> float:
    """p(t) = (1/t) int_0^t G(t - u) du for an M/G/inf queue."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    if t == 0:
        return 0.0
    grid = np.linspace(0.0, t, 257)
    g = np.array([float(service_cdf(v)) for v in grid])
    if np.any(np.diff(g) < 0) or np.any(g < 0) or np.any(g > 1):
        raise DomainError("service_cdf must be a nondecreasing function into [0, 1]")
    if points is not None:
        points = [p for p in points if 0 < p < t]
    val, _ = integrate.quad(service_cdf, 0.0, t, epsabs=1e-12, epsrel=1e-12, limit=500, points=points)
    return val / t


def mginf_departures_pmf(k: int, rho: float, t: float, service_cdf, points=None) -> float:
    """P(D(t) = k) for M/G/inf: Poisson with mean rho t p(t)."""
    if k < 0:
        raise DomainError("k must be nonnegative")
    p = departure_probability(t, service_cdf, points)
    return float(poisson.pmf(k, rho * t * p))


def initial_departures_pmf(k: int, n0: int, t: float) -> float:
    """Departures by time t among n0 customers present at 0: Binomial(n0, 1 - e**-t)."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    if k < 0 or k > n0:
        return 0.0
    return float(binom.pmf(k, n0, -math.expm1(-t)))


# -- moments -------------------------------------------------------------------


@dataclass(frozen=True)
class Moments:
    arrivals: MomentSet
    nu: MomentSet
    departures: MomentSet
    kappa: MomentSet
    kt: Optional[MomentSet] = None
    t: Optional[float] = None
    extras: dict = field(default_factory=dict)


def kappa_mean(params: QueueParams) -> float:
    rho, s = params.rho, params.sigma
    return (rho + (s + 1.0) * (s + rho)) / (s * (s + 1.0))


def kappa_mean_laplace(params: QueueParams) -> float:
    rho, s = params.rho, params.sigma
    return 1.0 + rho * (2.0 + s) / (s * (1.0 + s))


def kappa_second_moment(params: QueueParams) -> float:
    rho, s = params.rho, params.sigma
    return (
        1.0
        + rho * (8.0 + 3.0 * s) / (s * (1.0 + s))
        + 2.0 * rho**2 * (8.0 + s * (16.0 + s * (7.0 + s))) / (s**2 * (1.0 + s) ** 2 * (2.0 + s))
    )


def kt_moments(rho: float, t: float) -> MomentSet:
    """Mean and second moment of K(t) = 1 + N' + 2 D' (exit event counted)."""
    a, b = _kt_rates(rho, t)
    mean = 1.0 + a + 2.0 * b
    return MomentSet(mean, a + 4.0 * b + mean**2)


def exact_means(params: QueueParams, t: Optional[float] = None) -> Moments:
    rho, s = params.rho, params.sigma
    e_a = rho / s
    e_nu = rho / (s + 1.0)
    e_d = rho / (s * (s + 1.0))
    e_kappa = kappa_mean(params)
    if abs((e_kappa - 1.0) - (e_nu + 2.0 * e_d)) > 1e-12 * max(1.0, e_kappa):
        raise ArithmeticError("conservation of means violated")
    return Moments(
        arrivals=MomentSet(e_a, e_a + 2.0 * e_a**2),
        nu=MomentSet(e_nu),
        departures=MomentSet(e_d),
        kappa=MomentSet(e_kappa, kappa_second_moment(params)),
        kt=None if t is None else kt_moments(rho, t),
        t=t,
    )
