"""Transient laws of the M/M/inf and M/M/c/c queues by spectral methods.

Laws are computed from the spectral measures of the absorbed jump chain
(orthogonal polynomials, Charlier polynomials, Kummer series) and checked
against truncated-matrix and Monte Carlo oracles in :mod:`qspectral.oracles`.
"""
__version__ = "0.1.0"

from .errors import (
    ConvergenceError,
    DomainError,
    NumericError,
    PoleError,
    QSpectralError,
    SimulationRunaway,
    TruncationError,
)
from .spectral_core import QueueParams
from .special_fn import DiscreteMeasure, ScaledReal, charlier, chi0, kummer_phi, poisson_measure
from .spectral_core import chi_sigma, mminf_spectral_measure, p_poly
from .transient_inf import (
    Pmf,
    d_gf,
    d_pmf,
    dt_pmf,
    kappa_gf,
    kt_gf,
    kt_pmf,
    nt_pmf,
    nu_pmf,
)
from .finite_capacity import (
    FiniteSpectrum,
    delta_c_gf,
    finite_spectrum_phi,
    finite_spectrum_psi,
    kappa_c_gf,
    nt_c_pmf,
    nu_c_pmf,
)

__all__ = [name for name in dir() if not name.startswith("_")]
