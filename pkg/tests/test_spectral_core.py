import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qspectral.errors import ConvergenceError, DomainError, PoleError
from qspectral.special_fn import charlier, chi0
from qspectral.spectral_core import (
    QueueParams,
    atom_location,
    atom_mass,
    chi_sigma,
    chi_sigma_kummer,
    mminf_spectral_measure,
    p_egf,
    p_poly,
    p_table,
    pi_weight,
    stieltjes_p,
)

ORTHO_PAIRS = [(1.0, 0.5), (1.0, 2.0), (4.0, 0.5), (4.0, 2.0)]


def gram(params, nmax=15):
    meas = mminf_spectral_measure(params, tol=1e-14)
    G = meas.integrate(lambda x: (lambda P: P[:, None, :] * P[None, :, :])(p_table(nmax, params, x)))
    pi = np.array([pi_weight(n, params) for n in range(nmax + 1)])
    return G, pi


def test_params_validation():
    for bad in (dict(rho=0), dict(rho=-1), dict(rho=1, sigma=0), dict(rho=math.inf)):
        with pytest.raises(DomainError):
            QueueParams(**bad)
    with pytest.raises(DomainError):
        QueueParams(1, 1, capacity=1.5)
    assert QueueParams(2, 0.5).alpha == 2.5


def test_p_poly_examples():
    p = QueueParams(2, 1)
    assert float(p_poly(0, p, 0.3)) == 1.0
    assert float(p_poly(1, p, 0.5)) == pytest.approx(0.75, abs=1e-15)
    assert float(p_poly(1, p, 0.1, "second")) == pytest.approx(1.5, abs=1e-15)


def test_p_poly_charlier_relation():
    p = QueueParams(1, 2)
    x = 0.4
    c = float(charlier(3, (p.rho - p.alpha * x * x) / (x * x), p.rho / (x * x)))
    assert float(p_poly(3, p, x)) == pytest.approx(x**-3 * c, rel=1e-11)


def test_pi_weight():
    assert pi_weight(0, QueueParams(3, 2)) == 1.0
    assert pi_weight(1, QueueParams(1, 1)) == pytest.approx(1.5)
    p = QueueParams(2.5, 0.7)
    for n in range(50):
        up = p.rho / (n + p.alpha)
        down = (n + 1) / (n + 1 + p.alpha)
        assert up * pi_weight(n, p) == pytest.approx(down * pi_weight(n + 1, p), rel=1e-14)


def test_atoms_examples():
    p = QueueParams(3, 1)
    assert atom_location(0, p) == pytest.approx(math.sqrt(3) / 2, rel=1e-15)
    assert atom_mass(0, p) == pytest.approx(math.exp(-4) / 2, rel=1e-14)
    assert atom_location(1, p) == pytest.approx(0.7745967, abs=1e-7)
    assert atom_mass(1, p) == pytest.approx(2 * math.exp(-5), rel=1e-14)
    meas = mminf_spectral_measure(p)
    assert meas.locations[-1] == pytest.approx(math.sqrt(3) / 2)
    assert meas.masses[-1] == pytest.approx(math.exp(-4) / 2, rel=1e-14)


@pytest.mark.parametrize("rho", [0.5, 1.0, 3.0])
@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
def test_total_mass(rho, sigma):
    meas = mminf_spectral_measure(QueueParams(rho, sigma))
    assert meas.probability
    assert meas.total_mass == pytest.approx(1.0, abs=1e-12)
    assert meas.integrate(lambda x: np.ones_like(x)) == pytest.approx(1.0, abs=1e-12)


def test_measure_caps_atom_count():
    with pytest.raises(ConvergenceError):
        mminf_spectral_measure(QueueParams(5000.0, 1.0))
    with pytest.raises(DomainError):
        mminf_spectral_measure(QueueParams(1, 1), tol=0)


def test_spectrum_bound_and_symmetry():
    for rho, sigma in [(0.3, 2), (5, 0.1), (1, 1)]:
        p = QueueParams(rho, sigma)
        meas = mminf_spectral_measure(p)
        top = math.sqrt(rho / (rho + sigma))
        assert np.max(np.abs(meas.locations)) == pytest.approx(top, rel=1e-15)
        assert top < 1 and top <= 2 * top
        np.testing.assert_allclose(meas.locations, -meas.locations[::-1], rtol=0, atol=0)
        np.testing.assert_allclose(meas.masses, meas.masses[::-1], rtol=0, atol=0)


@pytest.mark.parametrize("rho,sigma", [(4.0, 0.5), (4.0, 2.0)])
def test_orthogonality_absolute(rho, sigma):
    G, pi = gram(QueueParams(rho, sigma))
    target = np.diag(1.0 / pi)
    assert np.max(np.abs(G - target)) <= 1e-9


@pytest.mark.parametrize("rho,sigma", [(1.0, 0.5), (1.0, 2.0)])
def test_orthogonality_absolute_small_rho(rho, sigma):
    # Literal absolute criterion.  1/pi_15 is about 1e11 here, so double
    # rounding alone leaves errors near 1e-5; kept as stated.
    G, pi = gram(QueueParams(rho, sigma))
    target = np.diag(1.0 / pi)
    assert np.max(np.abs(G - target)) <= 1e-9


@pytest.mark.parametrize("rho,sigma", ORTHO_PAIRS)
def test_orthogonality_normalised(rho, sigma):
    G, pi = gram(QueueParams(rho, sigma))
    s = np.sqrt(pi)
    assert np.max(np.abs(s[:, None] * G * s[None, :] - np.eye(len(pi)))) <= 1e-9


def test_parity():
    p = QueueParams(1.7, 0.6)
    for x in (0.1, 0.37, 0.8, 1.3):
        a = p_table(30, p, x)
        b = p_table(30, p, -x)
        for n in range(31):
            assert b[n] == pytest.approx((-1) ** n * a[n], rel=1e-12, abs=0)


def test_eigen_residual():
    p = QueueParams(2.0, 0.5)
    N = 60
    for k in range(5):
        for x in (atom_location(k, p), -atom_location(k, p)):
            P = p_table(N, p, x)
            for n in range(N):
                up = p.rho / (n + p.alpha)
                down = n / (n + p.alpha)
                lhs = up * P[n + 1] + (down * P[n - 1] if n else 0.0)
                assert lhs == pytest.approx(x * P[n], rel=1e-9, abs=1e-12)


def test_chi_sigma_examples():
    p = QueueParams(1, 1)
    assert chi_sigma(p, 1.0) == pytest.approx(2 * (1 - math.exp(-1)), abs=1e-12)
    assert chi_sigma(p, 1.0) == pytest.approx(p.alpha * chi0(p.sigma, p.rho), abs=1e-12)
    assert 1e3 * chi_sigma(p, 1e3) == pytest.approx(1.0, abs=1e-6)
    q = QueueParams(2, 0.5)
    assert chi_sigma(q, 2.0) == pytest.approx(chi_sigma_kummer(q, 2.0), abs=1e-10)


def test_chi_sigma_poles():
    p = QueueParams(3, 1)
    with pytest.raises(PoleError):
        chi_sigma(p, math.sqrt(3) / 2 + 1e-12)
    with pytest.raises(PoleError):
        chi_sigma(p, 0.0)


@settings(max_examples=25, deadline=None)
@given(rho=st.floats(0.2, 5), sigma=st.floats(0.2, 5), z=st.floats(1.0, 4.0))
def test_chi_sigma_two_paths(rho, sigma, z):
    p = QueueParams(rho, sigma)
    assert chi_sigma(p, z) == pytest.approx(chi_sigma_kummer(p, z), rel=1e-10)


def test_stieltjes_p():
    p = QueueParams(1, 1)
    assert stieltjes_p(0, p, 1.0) == pytest.approx(chi_sigma(p, 1.0), rel=1e-15)
    z = 1.3
    meas = mminf_spectral_measure(p)
    quad = meas.integrate(lambda x: p_table(2, p, x)[2] / (z - x))
    assert stieltjes_p(2, p, z) == pytest.approx(quad, abs=1e-10)
    q = QueueParams(2, 1)
    assert stieltjes_p(1, q, 2.0) == pytest.approx(float(p_poly(1, q, 2.0)) * chi_sigma(q, 2.0) - 1.5, rel=1e-14)


def test_p_egf():
    p = QueueParams(1, 1)
    assert p_egf(p, 0.7, 0.0) == 1.0
    assert p_egf(p, 0.5, 0.5) == pytest.approx(0.5625 * math.e, rel=1e-14)
    P = p_table(80, p, 0.6)
    series = sum(P[n] * 0.3**n / math.factorial(n) for n in range(81))
    assert p_egf(p, 0.6, 0.3) == pytest.approx(series, abs=1e-10)
    with pytest.raises(DomainError):
        p_egf(p, 0.0, 0.1)
    with pytest.raises(DomainError):
        p_egf(p, 0.5, 3.0)
