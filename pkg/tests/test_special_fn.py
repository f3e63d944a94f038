import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import hyp1f1

from qspectral.errors import ConvergenceError, DomainError
from qspectral.special_fn import (
    CharlierParams,
    ScaledReal,
    charlier,
    charlier_egf,
    charlier_stieltjes,
    charlier_table,
    chi0,
    chi0_convergent,
    kummer_phi,
    poisson_measure,
)


def test_charlier_examples():
    assert float(charlier(0, 7.3, 1)) == 1.0
    assert float(charlier(1, 3, 2)) == pytest.approx(-0.5, abs=1e-15)
    assert float(charlier(2, 5, 2, "second")) == pytest.approx(0.5, abs=1e-15)
    assert float(charlier(2, 1, 1)) == pytest.approx(-1.0, abs=1e-15)


def test_charlier_params_validation():
    with pytest.raises(DomainError):
        CharlierParams(-1.0)
    with pytest.raises(DomainError):
        charlier(3, math.nan, 1.0)
    with pytest.raises(DomainError):
        charlier(2, 1.0, math.inf)
    assert float(charlier(2, 1.0, CharlierParams(1.0))) == pytest.approx(-1.0)


def test_scaled_real_roundtrip_and_overflow():
    for v in (0.0, 1.0, -3.5, 1e-300, 7e300):
        s = ScaledReal.from_float(v)
        assert float(s) == v
        assert s.mantissa == 0.0 or 1.0 <= abs(s.mantissa) < 2.0
    big = charlier(3000, -5.0, 1.0)
    assert big.exponent > 1024
    assert math.isinf(float(big))
    assert big.log2abs() > 1024


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0, 8.0])
def test_charlier_symmetry(a):
    for n in range(0, 41, 3):
        for x in range(0, 41, 4):
            lhs = float(charlier(n, x, a))
            rhs = float(charlier(x, n, a))
            assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(1, 40),
    x=st.floats(-20, 60, allow_nan=False),
    a=st.floats(0.1, 20),
)
def test_recurrence_residual(n, x, a):
    c = charlier_table(n + 1, x, a)
    terms = [a * c[n + 1], (x - n - a) * c[n], n * c[n - 1]]
    scale = max(abs(t) for t in terms)
    assert abs(sum(terms)) <= 1e-12 * scale + 1e-300


def test_table_matches_scalar():
    xs = np.array([0.0, 1.5, 4.0])
    tab = charlier_table(12, xs, 2.5, "second")
    for j, x in enumerate(xs):
        assert tab[12, j] == pytest.approx(float(charlier(12, x, 2.5, "second")), rel=1e-13)


def test_egf_examples():
    assert charlier_egf(1, 2, 1) == pytest.approx(math.e / 2, rel=1e-15)
    assert charlier_egf(0, 3, 0.7) == pytest.approx(math.exp(0.7), rel=1e-15)
    with pytest.raises(DomainError):
        charlier_egf(0.5, 1.0, 2.0)
    # integer x allows any z
    assert charlier_egf(2, 1.0, 3.0) == pytest.approx(math.exp(3.0) * 4.0)


@pytest.mark.parametrize("x", [0, 1, 2, 5])
@pytest.mark.parametrize("a", [1.0, 2.0])
def test_egf_consistency(x, a):
    for z in (-a / 2, -a / 5, a / 3, a / 2):
        c = charlier_table(80, x, a)
        series = sum(c[n] * z**n / math.factorial(n) for n in range(81))
        assert series == pytest.approx(charlier_egf(x, a, z), abs=1e-10)


def test_kummer_examples():
    assert kummer_phi(1, 2, 0) == 1.0
    assert kummer_phi(1, 2, 1) == pytest.approx(math.e - 1, rel=1e-15)
    assert kummer_phi(1, 3, 1) == pytest.approx(2 * (math.e - 2), rel=1e-15)
    with pytest.raises(DomainError):
        kummer_phi(1, -2, 1)


def test_kummer_cap_reports_last_term():
    with pytest.raises(ConvergenceError) as info:
        kummer_phi(1.0, 1.5, 200.0, max_terms=50)
    assert info.value.last_term > 0


def test_chi0_examples():
    assert chi0(1, 1) == pytest.approx(1 - math.exp(-1), rel=1e-15)
    assert chi0(5, 1e-12) == pytest.approx(0.2, rel=1e-11)
    assert chi0_convergent(2, 1, 200) == pytest.approx(chi0(2, 1), abs=1e-10)
    with pytest.raises(DomainError):
        chi0(0.0, 1.0)


@pytest.mark.parametrize("z", [1.0, 2.0])
@pytest.mark.parametrize("a", [1.0, 2.0])
def test_convergents_settle(z, a):
    target = chi0(z, a)
    errs = [abs(chi0_convergent(z, a, K) - target) for K in (1, 2, 4, 8, 16)]
    # strictly decreasing until the rounding floor
    for e0, e1 in zip(errs, errs[1:]):
        assert e1 < e0 or e1 < 1e-15
    assert abs(chi0_convergent(z, a, 200) - target) < 1e-10


def test_poisson_measure():
    m = poisson_measure(1.0)
    assert m.masses[0] == pytest.approx(math.exp(-1), rel=1e-15)
    assert m.total_mass == pytest.approx(1.0, abs=1e-15)
    m4 = poisson_measure(4.0, tol=1e-14)
    assert m4.truncation_index >= 30
    assert m4.masses.sum() >= 1 - 1e-14
    with pytest.raises(DomainError):
        poisson_measure(1.0, tol=0.0)


def test_charlier_stieltjes_examples():
    assert charlier_stieltjes(0, 1, 1) == pytest.approx(1 - math.exp(-1), rel=1e-15)
    direct = sum(
        float(charlier(2, n, 1.0)) / (1.5 + n) * math.exp(-1) / math.factorial(n) for n in range(60)
    )
    assert charlier_stieltjes(2, 1.5, 1) == pytest.approx(direct, abs=1e-11)
    c1 = float(charlier(1, -2, 3))
    assert charlier_stieltjes(1, 2, 3) == pytest.approx(c1 * chi0(2, 3) - 1 / 3, rel=1e-14)


@pytest.mark.parametrize("a", [1.0, 4.0])
@pytest.mark.parametrize("z", [0.5, 1.0, 3.0])
def test_stieltjes_identity(a, z):
    meas = poisson_measure(a, tol=1e-18, min_atoms=60)
    quad = meas.integrate(lambda x: charlier_table(10, x, a) / (z + x))
    for m in range(11):
        assert charlier_stieltjes(m, z, a) == pytest.approx(quad[m], abs=1e-10)


@pytest.mark.parametrize("alpha,beta,z", [(1.0, 2.5, -3.0), (0.5, 1.5, 2.0), (2.0, 3.7, -10.0), (1.0, 1.2, 0.3)])
def test_kummer_matches_scipy(alpha, beta, z):
    assert kummer_phi(alpha, beta, z) == pytest.approx(hyp1f1(alpha, beta, z), rel=1e-12)
