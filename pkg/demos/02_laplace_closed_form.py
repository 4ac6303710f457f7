"""
Laplace innovations: a closed form to aim at
============================================

With two-sided exponential innovations the generating function of the
killing time started from 0 is a ratio of q-Pochhammer products, and its
first pole s* gives the persistence exponent as log s*.  We compute that
value independently, then see how fast the discretized kernel approaches it.
"""
import time

from ar1persist import kernel, oracles, spectral
from ar1persist.chain import ChainParams
from ar1persist.innovations import Laplace

# The oracle: bisect the sign change of (as; a^2)_inf + (s; a^2)_inf on (1, 1/a).
for a in (0.3, 0.5, 0.7):
    root = oracles.laplace_root(a)
    print(f"a = {a}: s* = {root.s_star:.13f}, lambda_a = {root.lambda_a:.13f}")

# The generating function climbs from 0 to 1 at s = 1 and blows up at s*.
a = 0.5
s_star = oracles.laplace_root(a).s_star
for s in (0.5, 1.0, 1.2, 1.35, 1.40):
    print(f"  E_0[s^T] at s = {s:<5}: {oracles.laplace_gf(s, a):.6f}")
print(f"  pole at s* = {s_star:.10f}")

# Now the numerics.  The midpoint rule loses O(h^2); the composite two-point
# Gauss-Legendre rule (same cell masses, finer interior split) gains about two orders.
params = ChainParams(a, Laplace())
cap = kernel.default_cap(params)
exact = oracles.laplace_lambda_a(a)
print(f"\ncap = {cap} (sf((1-a) cap) < 1e-10)")
print(f"{'nodes':>6} {'midpoint error':>16} {'Gauss-Legendre error':>22}")
for n in (50, 100, 200, 400, 800):
    row = []
    for scheme in kernel.SCHEMES:
        lam = spectral.spectrum_for(params, n, cap=cap, scheme=scheme).triple.lambda_a
        row.append(abs(lam - exact))
    print(f"{n:>6} {row[0]:>16.3e} {row[1]:>22.3e}")

# The default run that the acceptance suite times.
t0 = time.perf_counter()
run = spectral.spectrum_for(params, 400)
print(f"\n400 nodes: |error| = {abs(run.triple.lambda_a - exact):.2e} "
      f"in {time.perf_counter() - t0:.2f}s, {run.triple.iterations} iterations")

# Rescaling the innovations rescales the chain and leaves T_0 alone.  With
# the cap scaled along, the discrete kernels coincide too.
for b in (0.2, 1.0, 5.0):
    p = ChainParams(a, Laplace(b))
    lam = spectral.spectrum_for(p, 400, cap=cap * b).triple.lambda_a
    print(f"  scale {b}: lambda = {lam:.8f}")
