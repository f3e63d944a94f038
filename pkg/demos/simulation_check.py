"""Monte Carlo against the exact laws.

Each block of replications draws from its own counter-based stream, so
the result does not depend on thread count (set QSPECTRAL_THREADS).
"""
import math

from scipy.stats import poisson

from qspectral import oracles, transient_inf as ti
from qspectral.oracles import FIXED_T, SimConfig
from qspectral.spectral_core import QueueParams

n = 200_000
p = QueueParams(1.0, 1.0)
obs = oracles.simulate_observer(SimConfig(p, n, seed=1))
for name, ref in (("nu", ti.nu_values(40, p)), ("d", ti.d_values(40, p))):
    tv = oracles.tv_distance(obs.frequencies(name), ref)
    print(f"{name:2}: TV {tv:.2e}, typical {oracles.expected_tv(ref, n):.2e}")
print(f"mean arrivals {obs.mean('a'):.4f} +- {obs.stderr('a'):.4f} (exact 1)")

fix = oracles.simulate_fixed_t(SimConfig(p, n, seed=2, mode=FIXED_T, t=1.0))
ref = poisson.pmf(range(40), 1 - math.exp(-1))
print(f"N(1): TV {oracles.tv_distance(fix.frequencies('N'), ref):.2e}, typical {oracles.expected_tv(ref, n):.2e}")
