"""Tail summation for slowly decaying, smooth series.

The spectral masses of the M/M/inf absorbed chain and the departure
generating function both carry weights of the form

    w_k(alpha) = (alpha + k)**k * exp(-(alpha + k)) / k!

which decay only like k**-1/2.  Partial sums therefore converge
algebraically; the remainder is evaluated by Euler-Maclaurin.
"""
import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import gammaln

_STIRLING_SWITCH = 20.0

_u, _w = leggauss(96)
_GL_U = 0.5 * (_u + 1.0)
_GL_W = 0.5 * _w
del _u, _w


def log_abel_weight(k, alpha):
    """Return log((alpha+k)**k * exp(-(alpha+k)) / Gamma(k+1)) for real k >= 0.

    For k >= 20 the leading Stirling terms are cancelled analytically so the
    result keeps full relative accuracy for arbitrarily large k.
    """
    k = np.asarray(k, dtype=float)
    out = np.empty_like(k)
    small = k < _STIRLING_SWITCH
    ks = k[small]
    out[small] = ks * np.log(alpha + ks) - (alpha + ks) - gammaln(ks + 1.0)
    kl = k[~small]
    inv = 1.0 / kl
    inv2 = inv * inv
    rem = inv * (1 / 12 + inv2 * (-1 / 360 + inv2 * (1 / 1260 + inv2 * (-1 / 1680 + inv2 / 1188))))
    out[~small] = kl * np.log1p(alpha / kl) - alpha - 0.5 * np.log(2 * np.pi * kl) - rem
    return out


def abel_weight(k, alpha):
    return np.exp(log_abel_weight(k, alpha))


def euler_maclaurin_tail(f, k0):
    """Approximate ``sum(f(k) for k = k0, k0+1, ...)``.

    ``f`` maps an array of real k (last axis) to values of the same trailing
    shape; leading axes are carried through.  ``f`` must be smooth on the
    scale of one unit in k and behave like ``k**-p * g(1/k)`` with p > 1 and
    g analytic, which makes the integrand below analytic in u.

    The integral over [k0, inf) uses k = k0 / u**2 and 96-point
    Gauss-Legendre on (0, 1); the B2 and B4 derivative corrections use
    5-point central differences with unit step.
    """
    k0 = float(k0)
    if k0 < 3:
        raise ValueError("tail start must be >= 3")
    k = k0 / _GL_U**2
    vals = np.asarray(f(k), dtype=float)
    integral = (vals * (2.0 * k0 / _GL_U**3)) @ _GL_W
    g = np.asarray(f(k0 + np.arange(-2.0, 3.0)), dtype=float)
    g0, g1, g2, g3, g4 = (g[..., i] for i in range(5))
    d1 = (g0 - 8.0 * g1 + 8.0 * g3 - g4) / 12.0
    d3 = (-g0 + 2.0 * g1 - 2.0 * g3 + g4) / 2.0
    return integral + 0.5 * g2 - d1 / 12.0 + d3 / 720.0


def head_plus_tail(f, head_terms, tol=1e-14, max_head=1 << 17):
    """Sum f over k = 0, 1, ... as an explicit head plus an Euler-Maclaurin tail.

    The head length doubles until the totals obtained with head lengths K
    and 2K agree within ``tol``.  Returns ``(total, K, tail_at_K, err)``.
    """
    from .errors import ConvergenceError

    K = int(max(head_terms, 8))
    ks = np.arange(0, K, dtype=float)
    head = np.asarray(f(ks)).sum(axis=-1)
    tail = euler_maclaurin_tail(f, K)
    while True:
        ks2 = np.arange(K, 2 * K, dtype=float)
        head2 = head + np.asarray(f(ks2)).sum(axis=-1)
        tail2 = euler_maclaurin_tail(f, 2 * K)
        err = np.max(np.abs((head + tail) - (head2 + tail2)))
        if err <= tol:
            return head + tail, K, tail, err
        if 2 * K > max_head:
            raise ConvergenceError(
                f"tail summation did not settle below {tol:g} with {2 * K} head terms",
                last_term=float(err),
            )
        K, head, tail = 2 * K, head2, tail2
