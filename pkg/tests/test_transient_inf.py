import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.stats import poisson

from qspectral import transient_inf as ti
from qspectral.errors import DomainError
from qspectral.oracles import TruncatedChain, truncated_power
from qspectral.spectral_core import QueueParams

P11 = QueueParams(1, 1)


def laplace(f, sigma, T=None):
    """int_0^inf f(t) sigma e^{-sigma t} dt, split at a few points for accuracy."""
    T = T or 32.0 / sigma
    edges = [0.0, 0.5, 2.0, 8.0, T]
    total = 0.0
    for a, b in zip(edges, edges[1:]):
        total += integrate.quad(lambda t: f(t) * sigma * math.exp(-sigma * t), a, b, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
    return total


def test_pmf_container():
    law = ti.Pmf([0.5, 0.5])
    assert law.mean() == 0.5 and law.kmax == 1
    with pytest.raises(DomainError):
        ti.Pmf([0.5, 0.4])
    with pytest.raises(DomainError):
        ti.Pmf([1.5, -0.5])
    ti.Pmf([0.5, 0.4], tail_bound=0.1)
    with pytest.raises(DomainError):
        ti.MomentSet(2.0, 3.0)


def test_nu_examples():
    assert ti.nu_pmf(0, P11) == pytest.approx(1 - math.exp(-1), abs=1e-12)
    law = ti.nu_law(QueueParams(2, 1), 60)
    assert law.mean() == pytest.approx(1.0, abs=1e-10)
    assert ti.nu_values(60, P11).sum() == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("rho,sigma", [(0.5, 0.5), (1, 2), (3, 1), (6, 0.7)])
def test_nu_methods_agree(rho, sigma):
    p = QueueParams(rho, sigma)
    a = ti.nu_values(25, p, "spectral")
    b = ti.nu_values(25, p, "kummer")
    assert np.max(np.abs(a - b)) < 1e-9
    assert np.all(a >= 0) and np.all(a <= 1)


def test_nt_examples():
    assert ti.nt_pmf(0, 2, math.log(2)) == pytest.approx(math.exp(-1), rel=1e-14)
    assert ti.nt_pmf(0, 3.3, 0.0) == 1.0
    assert ti.nt_pmf(3, 1.5, 2, "spectral") == pytest.approx(ti.nt_pmf(3, 1.5, 2), abs=1e-10)
    with pytest.raises(DomainError):
        ti.nt_pmf(0, 1, -1)


def test_kappa_gf():
    for rho, sigma in [(1, 1), (0.3, 2), (4, 0.5)]:
        assert ti.kappa_gf(1.0, QueueParams(rho, sigma)) == 1.0
    h = 1e-5
    d = (ti.kappa_gf(1 + h, P11) - ti.kappa_gf(1 - h, P11)) / (2 * h)
    assert d == pytest.approx(2.5, abs=1e-5)
    chain = TruncatedChain.for_params(P11)
    series = sum(0.5**k * sum(chain.exit[m] * truncated_power(chain, k - 1, m) for m in range(chain.M)) for k in range(1, 90))
    assert ti.kappa_gf(0.5, P11) == pytest.approx(series, abs=1e-8)


def test_kappa_law_from_oracle():
    law = ti.kappa_law(P11)
    assert law.method == "oracle"
    assert law.mean() == pytest.approx(2.5, abs=1e-10)
    assert law.values[0] == 0.0 and law.values[1] == pytest.approx(0.5)


def test_kt_gf():
    assert ti.kt_gf(1.0, 2.0, 0.3) == 1.0
    h = 1e-5
    d = (ti.kt_gf(1 + h, 1, 1) - ti.kt_gf(1 - h, 1, 1)) / (2 * h)
    assert d == pytest.approx(2 + math.exp(-1), abs=1e-5)
    lap = laplace(lambda t: ti.kt_gf(0.4, 1.0, t), 1.0)
    assert lap == pytest.approx(ti.kappa_gf(0.4, P11), abs=1e-8)


def test_kt_pmf():
    assert ti.kt_pmf(1, 1, 1) == pytest.approx(math.exp(-1), rel=1e-14)
    assert ti.kt_pmf(0, 1, 1) == 0.0
    assert ti.kt_values(80, 1, 1).sum() == pytest.approx(1.0, abs=1e-10)
    # coefficient of z^3 by a central finite-difference Cauchy formula on a small circle
    r, n = 0.5, 64
    w = r * np.exp(2j * np.pi * np.arange(n) / n)
    vals = np.array([complex(wk) * np.exp(1.0 * complex(wk) * (1 - complex(wk)) * (1 - math.exp(-1)) - 1.0 * (1 - complex(wk) ** 2)) for wk in w])
    coef3 = (np.fft.fft(vals) / n)[3].real / r**3
    assert ti.kt_pmf(3, 1, 1) == pytest.approx(coef3, abs=1e-8)


@settings(max_examples=20, deadline=None)
@given(rho=st.floats(0.1, 6), t=st.floats(0.0, 6))
def test_kt_poisson_decomposition(rho, t):
    kmax = 25
    kt = ti.kt_values(kmax, rho, t)
    n = ti.nt_values(kmax, rho, t)
    d = ti.dt_values(kmax, rho, t)
    for k in range(1, kmax + 1):
        conv = sum(n[k - 1 - 2 * j] * d[j] for j in range((k - 1) // 2 + 1))
        assert kt[k] == pytest.approx(conv, abs=1e-10)


def test_kt_moments():
    m = ti.kt_moments(1, 1)
    assert m.mean == pytest.approx(2 + math.exp(-1), rel=1e-14)
    k = np.arange(120)
    vals = ti.kt_values(119, 1, 1)
    assert m.second_moment == pytest.approx(float(k**2 @ vals), rel=1e-12)


def test_d_gf():
    for rho, sigma in [(1, 1), (0.5, 2), (3, 0.5)]:
        p = QueueParams(rho, sigma)
        assert ti.d_gf(1.0, p) == pytest.approx(1.0, abs=1e-12)
        for z in (-0.5, 0.0, 0.4, 0.9):
            assert ti.d_gf(z, p, "series") == pytest.approx(ti.d_gf(z, p, "kummer"), abs=1e-11)
    assert ti.d_gf(0.0, P11) == pytest.approx(math.e - 2, abs=1e-13)
    h = 1e-5
    d = (ti.d_gf(1 + h, P11) - ti.d_gf(1 - h, P11)) / (2 * h)
    assert d == pytest.approx(0.5, abs=1e-5)


def test_d_pmf():
    assert ti.d_pmf(0, P11) == pytest.approx(math.e - 2, abs=1e-13)
    vals = ti.d_values(60, P11)
    assert vals.sum() == pytest.approx(1.0, abs=1e-10)
    assert float(np.arange(61) @ vals) == pytest.approx(0.5, abs=1e-10)


def test_dt():
    assert ti.dt_pmf(0, 1, 1) == pytest.approx(math.exp(-math.exp(-1)), rel=1e-14)
    assert ti.dt_pmf(0, 1, 0) == 1.0 and ti.dt_pmf(3, 1, 0) == 0.0
    assert ti.dt_pmf(4, 2, 3, "gf") == pytest.approx(ti.dt_pmf(4, 2, 3), abs=1e-13)
    lap = laplace(lambda t: ti.dt_pmf(2, 1, t), 1.0)
    assert lap == pytest.approx(ti.d_pmf(2, P11), abs=1e-8)


def test_laplace_bridges():
    p = QueueParams(1.5, 0.8)
    for m in range(4):
        assert laplace(lambda t: ti.nt_pmf(m, p.rho, t), p.sigma) == pytest.approx(ti.nu_pmf(m, p), abs=1e-7)
        assert laplace(lambda t: ti.dt_pmf(m, p.rho, t), p.sigma) == pytest.approx(ti.d_pmf(m, p), abs=1e-7)
    for z in (0.2, 0.7):
        assert laplace(lambda t: ti.kt_gf(z, p.rho, t), p.sigma) == pytest.approx(ti.kappa_gf(z, p), abs=1e-7)


def test_arrivals():
    for m in range(6):
        assert ti.arrivals_pmf(m, P11) == pytest.approx(2.0 ** -(m + 1), rel=1e-14)
    law = ti.arrivals_law(QueueParams(3, 2), 200)
    assert law.mean() == pytest.approx(1.5, abs=1e-10)
    assert law.values.sum() + law.tail_bound == pytest.approx(1.0, abs=1e-14)


def test_mginf():
    expo = lambda x: 1 - math.exp(-x)
    assert ti.mginf_departures_pmf(1, 1, 2, expo) == pytest.approx(ti.dt_pmf(1, 1, 2), abs=1e-10)
    det = lambda x: 1.0 if x >= 1 else 0.0
    assert ti.mginf_departures_pmf(0, 1.3, 0.8, det, points=[1.0]) == pytest.approx(1.0, abs=1e-12)
    for k in range(5):
        assert ti.mginf_departures_pmf(k, 1, 3, det, points=[1.0]) == pytest.approx(poisson.pmf(k, 2), abs=1e-10)
    with pytest.raises(DomainError):
        ti.mginf_departures_pmf(0, 1, 2, lambda x: math.sin(x) ** 2)


def test_initial_departures():
    assert ti.initial_departures_pmf(1, 1, math.log(2)) == pytest.approx(0.5, rel=1e-14)
    assert ti.initial_departures_pmf(3, 3, 50) == pytest.approx(1.0, abs=1e-12)
    assert sum(ti.initial_departures_pmf(k, 4, 0.8) for k in range(5)) == pytest.approx(1.0, abs=1e-14)
    assert ti.initial_departures_pmf(5, 4, 0.8) == 0.0


def test_exact_means():
    m = ti.exact_means(P11, t=1.0)
    assert (m.arrivals.mean, m.nu.mean, m.departures.mean, m.kappa.mean) == pytest.approx((1, 0.5, 0.5, 2.5))
    assert m.kappa.second_moment == pytest.approx(1 + 11 / 2 + 64 / 12, rel=1e-14)
    assert m.kt.mean == pytest.approx(2 + math.exp(-1))
    rng = np.random.default_rng(5)
    for rho, sigma in rng.uniform(0.05, 10, size=(20, 2)):
        p = QueueParams(float(rho), float(sigma))
        assert ti.kappa_mean(p) == pytest.approx(ti.kappa_mean_laplace(p), rel=1e-12)
        e = ti.exact_means(p)
        assert e.kappa.mean - 1 == pytest.approx(e.nu.mean + 2 * e.departures.mean, rel=1e-12)


def test_kappa_second_moment_from_gf():
    h = 1e-4
    g = lambda z: ti.kappa_gf(z, P11)
    second = (g(1 + h) - 2 * g(1) + g(1 - h)) / h**2
    first = (g(1 + h) - g(1 - h)) / (2 * h)
    assert second + first == pytest.approx(ti.kappa_second_moment(P11), abs=1e-5)
    law = ti.kappa_law(P11)
    k = np.arange(len(law))
    assert float(k**2 @ law.values) == pytest.approx(ti.kappa_second_moment(P11), abs=1e-9)
