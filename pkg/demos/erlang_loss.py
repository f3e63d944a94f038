"""M/M/c/c: finite spectra, the Karlin-McGregor law and blocked arrivals.

The transient queue-length law converges to the Erlang law; for large c
every finite-capacity law approaches its M/M/inf counterpart.
"""
import numpy as np

from qspectral import finite_capacity as fc
from qspectral import oracles, transient_inf as ti
from qspectral.spectral_core import QueueParams

c, rho = 3, 2.0
phi = fc.finite_spectrum_phi(c, rho)
print("eigenvalues of -B:", phi.eigenvalues, "masses:", phi.masses)
print("bisection on the Charlier root equation:", fc.phi_roots_bisection(c, rho))
for t in (0.5, 2.0, 10.0):
    print(f"N(t) t={t:4}: {np.round(fc.nt_c_values(c, rho, t), 8)}")
print("Erlang law     :", np.round(oracles.erlang_stationary(c, rho).values, 8))

# kappa^[c] counts a blocked arrival as an arrival plus the loss of that customer
p = QueueParams(rho, 1.0, c)
for z in (0.3, 0.8):
    print(f"E z^kappa z={z}: spectral {fc.kappa_c_gf(z, p):.15f}, chain oracle {oracles.kappa_gf_oracle(p, z, blocked_weight=2):.15f}")

big = QueueParams(1.0, 1.0, 30)
print("\nc=30 vs infinite servers, P(nu=0):", fc.nu_c_pmf(0, big), ti.nu_pmf(0, QueueParams(1.0, 1.0)))
