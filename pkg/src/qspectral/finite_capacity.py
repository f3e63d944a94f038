"""Spectra and transient laws of the M/M/c/c (Erlang loss) queue.

Two finite tridiagonal operators are involved:

* the absorbed jump chain A^[c](sigma) on {0..c}: rows n < c as in the
  M/M/inf chain; in row c arrivals are blocked and are not events, so
  a[c, c-1] = c/(c+sigma) and the row loses sigma/(c+sigma) to the observer;
* the generator B^[c] of the occupancy process.

Both are symmetrised by a diagonal similarity and handed to a symmetric
tridiagonal eigensolver.  The spectral masses are the squared first
components of the orthonormal eigenvectors.  Root finding on the scalar
eigenconditions gives an independent check of the eigenvalues.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal
from scipy.optimize import brentq
from scipy.special import gammaln

from .errors import DomainError, NumericError
from .special_fn import SECOND, charlier_table
from .spectral_core import QueueParams, p_table

PSI = "psi_c"
PHI = "phi_c"


@dataclass(frozen=True)
class SymmetricTridiagonal:
    diagonal: np.ndarray
    offdiagonal: np.ndarray

    def __post_init__(self):
        d = np.array(self.diagonal, dtype=float)
        e = np.array(self.offdiagonal, dtype=float)
        if d.ndim != 1 or e.shape != (max(len(d) - 1, 0),):
            raise DomainError("offdiagonal must have length len(diagonal) - 1")
        if np.any(e <= 0):
            raise DomainError("offdiagonal entries must be positive")
        d.flags.writeable = False
        e.flags.writeable = False
        object.__setattr__(self, "diagonal", d)
        object.__setattr__(self, "offdiagonal", e)

    @property
    def size(self) -> int:
        return len(self.diagonal)

    def dense(self) -> np.ndarray:
        return np.diag(self.diagonal) + np.diag(self.offdiagonal, 1) + np.diag(self.offdiagonal, -1)

    def eigh(self):
        """Eigenvalues (ascending) and orthonormal eigenvectors (columns)."""
        if self.size == 1:
            return self.diagonal.copy(), np.ones((1, 1))
        try:
            return eigh_tridiagonal(self.diagonal, self.offdiagonal, lapack_driver="stev")
        except LinAlgError as exc:
            raise NumericError(f"tridiagonal eigensolver failed: {exc}") from exc


@dataclass(frozen=True, eq=False)
class FiniteSpectrum:
    """Eigenvalues and spectral masses of a finite symmetrisable operator."""

    eigenvalues: np.ndarray
    masses: np.ndarray
    weights: np.ndarray
    kind: str

    def __post_init__(self):
        lam = np.array(self.eigenvalues, dtype=float)
        m = np.array(self.masses, dtype=float)
        if lam.shape != m.shape:
            raise DomainError("eigenvalues and masses differ in length")
        if np.any(np.diff(lam) <= 1e-12 * max(1.0, float(np.max(np.abs(lam))))):
            raise NumericError("eigenvalues are not simple")
        if np.any(m <= 0) or abs(m.sum() - 1.0) > 1e-12:
            raise NumericError(f"spectral masses invalid (total {m.sum()!r})")
        if self.kind == PSI and np.any(np.abs(lam) >= 1):
            raise NumericError("absorbed-chain eigenvalue outside (-1, 1)")
        if self.kind == PHI and (lam[0] < -1e-12 or abs(lam[0]) > 1e-12 * max(1.0, lam[-1])):
            raise NumericError("generator spectrum must start at 0")
        for name, v in (("eigenvalues", lam), ("masses", m), ("weights", np.array(self.weights, dtype=float))):
            v.flags.writeable = False
            object.__setattr__(self, name, v)

    @property
    def size(self) -> int:
        return len(self.eigenvalues)

    def atoms(self):
        return list(zip(self.eigenvalues.tolist(), self.masses.tolist()))


def _capacity(params: QueueParams, allow_zero=False) -> int:
    c = params.capacity
    if c is None:
        raise DomainError("params must carry a capacity")
    if c < 1 and not allow_zero:
        raise DomainError("spectra need capacity >= 1 (c = 0 is a closed-form degenerate case)")
    return c


def absorbed_rates(params: QueueParams):
    """Up / down probabilities of A^[c](sigma), rows 0..c."""
    c = _capacity(params)
    rho, sigma = params.rho, params.sigma
    n = np.arange(c + 1, dtype=float)
    total = n + sigma + rho
    total[c] = c + sigma
    up = rho / total
    up[c] = 0.0
    down = n / total
    return up, down


def _log_rho_pow(m, rho):
    m = np.asarray(m, dtype=float)
    return m * math.log(rho) - gammaln(m + 1.0)


def _spectrum(d, e, weights, kind):
    lam, vec = SymmetricTridiagonal(d, e).eigh()
    masses = vec[0] ** 2
    if kind == PHI:
        lam = lam.copy()
        lam[0] = max(lam[0], 0.0) if abs(lam[0]) <= 1e-12 * max(1.0, lam[-1]) else lam[0]
    return FiniteSpectrum(lam, masses / masses.sum(), weights, kind)


def finite_spectrum_psi(params: QueueParams) -> FiniteSpectrum:
    """Spectral measure d psi^[c](sigma; x) of the absorbed chain A^[c](sigma).

    The weights are pi_0 = 1 and pi_{n+1} = pi_n a[n, n+1] / a[n+1, n], so
    the last one uses the actual boundary row c/(c+sigma).
    """
    c = _capacity(params)
    up, down = absorbed_rates(params)
    ratio = up[:-1] / down[1:]
    weights = np.concatenate([[1.0], np.cumprod(ratio)])
    off = np.sqrt(up[:-1] * down[1:])
    spec = _spectrum(np.zeros(c + 1), off, weights, PSI)
    if c % 2 == 0:
        # parity forces an exact zero eigenvalue; remove eigensolver noise
        lam = spec.eigenvalues.copy()
        lam[c // 2] = 0.0
        spec = FiniteSpectrum(lam, spec.masses, weights, PSI)
    return spec


def finite_spectrum_phi(c: int, rho: float) -> FiniteSpectrum:
    """Spectral measure d phi^[c](rho; x) of -B^[c], weights rho**n / n!."""
    QueueParams(rho, capacity=c)
    if c < 1:
        raise DomainError("spectra need capacity >= 1")
    n = np.arange(c + 1, dtype=float)
    diag = n + rho
    diag[c] = c
    off = np.sqrt(rho * n[1:])
    weights = np.exp(_log_rho_pow(n, rho))
    return _spectrum(diag, off, weights, PHI)


# -- independent checks by root finding -----------------------------------------


def psi_characteristic(x, params: QueueParams):
    """g(x) = P_{c+1}(sigma; x) - x P_c(sigma; x); its roots are the psi^[c] atoms."""
    c = _capacity(params)
    p = p_table(c + 1, params.with_capacity(None), x)
    return p[c + 1] - np.asarray(x) * p[c]


def phi_characteristic(x, c: int, rho: float):
    """C_{c+1}(x; rho) - C_c(x; rho); its roots are the eigenvalues of -B^[c]."""
    C = charlier_table(c + 1, x, rho)
    return C[c + 1] - C[c]


def _bracketed_roots(g, lo, hi, count, xtol=1e-13, max_points=1 << 20):
    npts = 64 * (count + 1) + 1
    while npts <= max_points:
        grid = np.linspace(lo, hi, npts)
        vals = g(grid)
        roots = [float(x) for x, v in zip(grid, vals) if v == 0.0]
        s = np.sign(vals)
        for i in np.nonzero(s[:-1] * s[1:] < 0)[0]:
            roots.append(brentq(g, grid[i], grid[i + 1], xtol=xtol, rtol=4 * np.finfo(float).eps))
        if len(roots) == count:
            return np.sort(np.array(roots))
        npts = 2 * (npts - 1) + 1
    raise NumericError(f"bisection found {len(roots)} roots, expected {count}")


def psi_roots_bisection(params: QueueParams) -> np.ndarray:
    c = _capacity(params)
    return _bracketed_roots(lambda x: psi_characteristic(x, params), -1.0, 1.0, c + 1)


def phi_roots_bisection(c: int, rho: float) -> np.ndarray:
    # start slightly below 0 so the root at 0 is bracketed or hit exactly
    return _bracketed_roots(lambda x: phi_characteristic(x, c, rho), -0.5, 2.0 * (rho + c) + 1.0, c + 1)


def psi_residue_masses(params: QueueParams, roots=None) -> np.ndarray:
    """Masses (P*_{c+1} - x P*_c)(xi) / g'(xi) at the roots xi of g.

    g' is a 5-point central difference.
    """
    c = _capacity(params)
    if roots is None:
        roots = psi_roots_bisection(params)
    free = params.with_capacity(None)
    roots = np.asarray(roots, dtype=float)
    ps = p_table(c + 1, free, roots, SECOND)
    num = ps[c + 1] - roots * ps[c]
    h = 1e-4
    g = lambda x: psi_characteristic(x, params)
    dg = (g(roots - 2 * h) - 8 * g(roots - h) + 8 * g(roots + h) - g(roots + 2 * h)) / (12 * h)
    return num / dg


# -- laws ---------------------------------------------------------------------


def nu_c_values(params: QueueParams) -> np.ndarray:
    """P(nu^[c] = m), m = 0..c: sigma rho**m/m! int C_m(x; rho)/(sigma + x) d phi^[c]."""
    c = _capacity(params, allow_zero=True)
    if c == 0:
        return np.ones(1)
    rho, sigma = params.rho, params.sigma
    spec = finite_spectrum_phi(c, rho)
    C = charlier_table(c, spec.eigenvalues, rho)
    ints = C @ (spec.masses / (sigma + spec.eigenvalues))
    return sigma * np.exp(_log_rho_pow(np.arange(c + 1), rho)) * ints


def nu_c_pmf(m: int, params: QueueParams) -> float:
    c = _capacity(params, allow_zero=True)
    if m < 0:
        raise DomainError("m must be nonnegative")
    if m > c:
        return 0.0
    return float(nu_c_values(params)[m])


def nt_c_values(c: int, rho: float, t: float) -> np.ndarray:
    """P(N^[c](t) = m | N(0) = 0), m = 0..c (Karlin-McGregor form)."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    QueueParams(rho, capacity=c)
    if c == 0:
        return np.ones(1)
    spec = finite_spectrum_phi(c, rho)
    C = charlier_table(c, spec.eigenvalues, rho)
    ints = C @ (spec.masses * np.exp(-spec.eigenvalues * t))
    return np.exp(_log_rho_pow(np.arange(c + 1), rho)) * ints


def nt_c_pmf(m: int, c: int, rho: float, t: float) -> float:
    if m < 0:
        raise DomainError("m must be nonnegative")
    vals = nt_c_values(c, rho, t)
    return float(vals[m]) if m <= c else 0.0


def charlier_partial_egf(c: int, x, a: float, z: float):
    """sum_{m <= c} C_m(x; a) z**m / m!."""
    if c < 0:
        raise DomainError("c must be nonnegative")
    C = charlier_table(c, x, a)
    coef = np.ones(c + 1)
    for k in range(1, c + 1):
        coef[k] = coef[k - 1] * z / k
    out = np.tensordot(coef, C, axes=(0, 0))
    return float(out) if np.ndim(out) == 0 else out


def _phi_weighted_egf(c: int, a: float, w: float):
    """Atoms x_k of phi^[c](a) and their masses times sum_{m <= c} C_m(x_k; a) w**m / m!.

    Evaluating C_m at the top atoms loses everything to cancellation when
    a is small, so the products are read off the orthonormal eigenvectors
    instead: mass_k C_m(x_k; a) = (-1)**m sqrt(m! / a**m) V[0, k] V[m, k].
    """
    n = np.arange(c + 1, dtype=float)
    diag = n + a
    diag[c] = c
    x, V = SymmetricTridiagonal(diag, np.sqrt(a * n[1:])).eigh()
    log_coef = n * math.log(abs(w)) - 0.5 * (gammaln(n + 1.0) + n * math.log(a))
    coef = np.exp(log_coef) * (-np.sign(w)) ** n
    return x, V[0] * (coef @ V)


def kappa_c_gf(z: float, params: QueueParams) -> float:
    """E z**kappa^[c] = sigma z int C^[c](x; rho z^2; rho z) / (sigma + rho(1-z^2) + x) d phi^[c](rho z^2; x).

    In this law a blocked arrival counts as two events: the arrival and the
    immediate loss of that customer.  The chain A^[c] used for nu and delta
    ignores blocked arrivals; both agree when blocking is negligible.
    """
    c = _capacity(params, allow_zero=True)
    if abs(z) > 1:
        raise DomainError("|z| must be <= 1")
    if c == 0:
        return float(z)
    if z == 0:
        return 0.0
    rho, sigma = params.rho, params.sigma
    x, weighted = _phi_weighted_egf(c, rho * z * z, rho * z)
    return float(sigma * z * np.sum(weighted / (sigma + rho * (1 - z * z) + x)))


def _delta_prefactor(params: QueueParams, x):
    """sum_{m <= c} (rho x)**m / m! P_m(sigma; x), finite at x = 0."""
    c = params.capacity
    P = p_table(c, params.with_capacity(None), x)
    m = np.arange(c + 1)
    scale = np.exp(_log_rho_pow(m, params.rho))
    return np.tensordot(scale, P * np.asarray(x)[None, ...] ** m[:, None], axes=(0, 0))


def delta_c_gf(z: float, params: QueueParams) -> float:
    """E z**delta^[c] as an atom sum over the absorbed-chain spectrum."""
    c = _capacity(params, allow_zero=True)
    if abs(z) > 1:
        raise DomainError("|z| must be <= 1")
    if c == 0:
        return 1.0
    spec = finite_spectrum_psi(params)
    x = spec.eigenvalues
    pref = _delta_prefactor(params, x)
    return float(params.sigma / params.alpha * np.sum(spec.masses * pref / (1.0 - z * x * x)))


def kt_c_gf(z: float, c: int, rho: float, t: float) -> float:
    """Corrected-form E z**K^[c](t) = z int C^[c](x; rho z^2; rho z) e**(-(rho(1-z^2) + x) t) d phi^[c](rho z^2; x).

    As for :func:`kappa_c_gf`, a blocked arrival adds two to K^[c](t).
    """
    if t < 0:
        raise DomainError("t must be nonnegative")
    if abs(z) > 1:
        raise DomainError("|z| must be <= 1")
    QueueParams(rho, capacity=c)
    if c == 0 or z == 0:
        return float(z)
    x, weighted = _phi_weighted_egf(c, rho * z * z, rho * z)
    return float(z * np.sum(weighted * np.exp(-(rho * (1 - z * z) + x) * t)))
