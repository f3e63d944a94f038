"""Laws seen by an observer who leaves after an exponential(sigma) time.

nu is the queue length at the observer's exit, kappa the number of events
it saw (including its own exit) and d the number of departures.
"""
import numpy as np

from qspectral import transient_inf as ti
from qspectral.spectral_core import QueueParams

p = QueueParams(rho=1.0, sigma=1.0)
print("nu :", np.round(ti.nu_values(6, p), 8))
print("d  :", np.round(ti.d_values(6, p), 8))
kappa = ti.kappa_law(p, kmax=10)
print("kappa:", np.round(kappa.values[:10], 8))

m = ti.exact_means(p, t=1.0)
print("\nclosed-form means:", m)

h = 1e-5
slope = (ti.kappa_gf(1 + h, p) - ti.kappa_gf(1 - h, p)) / (2 * h)
print(f"E kappa from the gf derivative: {slope:.8f} (exact {ti.kappa_mean(p)})")
print(f"E kappa^2: {ti.kappa_second_moment(p):.10f}")
