"""Queue length and departures of M/M/inf started empty.

The spectral route (Charlier polynomials against the Poisson measure) is
printed next to the Poisson closed forms it must reproduce.
"""
import math

import numpy as np
from scipy.stats import poisson

from qspectral import transient_inf as ti

rho, t = 2.0, 1.0
spectral = ti.nt_values(8, rho, t, method="spectral")
closed = poisson.pmf(np.arange(9), rho * (1 - math.exp(-t)))
print(f"N(t), rho={rho}, t={t}")
print(" m   spectral              closed form")
for m, (a, b) in enumerate(zip(spectral, closed)):
    print(f"{m:2d}   {a:.17f}   {b:.17f}")
print(f"max |diff| = {np.max(np.abs(spectral - closed)):.1e}\n")

# departures: Cauchy coefficients of the generating function on the unit circle
gf = ti.dt_values(8, rho, t, method="gf")
closed = poisson.pmf(np.arange(9), rho * (t - 1 + math.exp(-t)))
print(f"D(t) via gf vs Poisson(rho(t-1+e^-t)): max |diff| = {np.max(np.abs(gf - closed)):.1e}")

# a general service law enters only through the departure probability p(t)
uniform_cdf = lambda s: min(max(s / 2.0, 0.0), 1.0)  # noqa: E731
print("M/G/inf, uniform(0,2) service:", np.round([ti.mginf_departures_pmf(k, rho, t, uniform_cdf) for k in range(4)], 6))
