"""
A killed chain small enough to solve by hand
============================================

Before trusting a 400-node kernel it helps to watch the machinery on a
2x2 matrix whose answers fit on a napkin.  State 1 and state 2 each die
with probability 0.4 per step; the surviving mass moves by

    Q = [[0.4, 0.2],
         [0.1, 0.5]].
"""
import math

import numpy as np

from ar1persist import oracles, renewal, spectral

blocks = oracles.finite_chain_blocks()
print("Q =\n", blocks.Q, "\nkill =", blocks.kill)

# The leading eigenvalue solves rho^2 - 0.9 rho + 0.18 = 0, so rho = 0.6 and
# the survival probability decays like 0.6^n.
triple = spectral.leading_eigentriple(blocks, tol=1e-14)
print(f"\nrho = {triple.rho:.15f}   lambda = -log rho = {triple.lambda_a:.15f}")

# Both rows of Q sum to 0.6, so the right eigenvector is flat.  The left one
# weights state 2 twice as heavily as state 1.
print("V  =", triple.V)
print("nu =", triple.nu, " (sum", triple.nu.sum(), ")")

# Power iterating the conditioned law from a point mass shows nu as the
# limit of "where am I, given that I am still alive".
mu = np.array([1.0, 0.0])
for n in range(1, 9):
    mu = mu @ blocks.Q
    mu /= mu.sum()
    print(f"  n={n}: law of X_n given survival = {mu.round(6)}")

# The renewal route asks a different question: with A = {1}, for which z does
# an excursion that leaves state 1 and comes back have total weight 1?
# K(z) = 0.02 z^2 / ((1 - 0.4 z)(1 - 0.5 z)) = 1 at z = 5/3, so the root is
# log(5/3), and log(5/3) = -log 0.6: the two routes agree exactly.
root = renewal.find_lambda_root(blocks, tol=1e-14)
print(f"\nrenewal root = {root.lambda_star:.15f}, log(5/3) = {math.log(5 / 3):.15f}")
print(f"bisection used {root.iterations} steps; the first few of them:")
for lam, rk, *_ in root.trace[:5]:
    print(f"  lambda = {lam:.6f}  r(K) = {rk:.6f}")
