"""The spectral measure of the absorbed chain and what it certifies.

Atoms sit at +-sqrt(rho/(sigma+rho+k)); their masses decay like k**-1.5,
so the far atoms are summed by Euler-Maclaurin rather than listed.
"""
import numpy as np

from qspectral.spectral_core import QueueParams, chi_sigma, chi_sigma_kummer, mminf_spectral_measure, p_table, pi_weight

p = QueueParams(rho=4.0, sigma=0.5)
meas = mminf_spectral_measure(p)
print(f"{len(meas.locations)} listed atoms, mass of the remaining atoms (summed by Euler-Maclaurin) {meas.tail_bound:.2e}, total {meas.total_mass:.15f}")
print("largest atoms:", meas.locations[-3:], "masses:", meas.masses[-3:])

G = meas.integrate(lambda x: (lambda P: P[:, None, :] * P[None, :, :])(p_table(6, p, x)))
pi = np.array([pi_weight(n, p) for n in range(7)])
print("orthogonality error, pi-scaled:", np.max(np.abs(np.sqrt(pi)[:, None] * G * np.sqrt(pi)[None, :] - np.eye(7))))

for z in (1.0, 1.5, -2.0):
    print(f"Stieltjes transform at z={z}: atoms {chi_sigma(p, z):.15f}, Kummer {chi_sigma_kummer(p, z):.15f}")
