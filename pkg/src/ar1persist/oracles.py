"""Closed-form reference values.

* Laplace innovations: E_0[s^T_0] = s (as; a^2)_inf / ((as; a^2)_inf + (s; a^2)_inf),
  whose first pole s* in (1, 1/a) gives lambda_a = log s*.  T_0 does not
  change when the innovations are rescaled, so the unit-scale value serves
  every Laplace scale.
* Gaussian innovations: the chain is an Ornstein-Uhlenbeck process sampled
  at integer times.
* Pareto-type right tail with index r: lambda_a = -r log a.
* A two-state killed chain with every quantity known by hand.
"""
from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np

from .errors import ConfigError, PastPole
from .kernel import Grid, KernelBlocks


@dataclass(frozen=True)
class QPochhammerEval:
    u: float
    q: float
    value: float
    terms_used: int
    truncation_bound: float


def q_pochhammer(u, q, rel_tol=1e-15, max_terms=1_000_000):
    """(u; q)_inf = prod_{k>=0} (1 - u q^k), truncated with a rigorous bound.

    After K factors the remaining product differs from 1 by at most
    expm1(t) with t = |u| q^K / (1 - q), so the absolute error of the partial
    product P_K is at most |P_K| expm1(t).
    """
    if not 0.0 <= q < 1.0:
        raise ConfigError("q must lie in [0, 1)")
    u, q = float(u), float(q)
    value, qk = 1.0, 1.0
    for k in range(max_terms):
        value *= 1.0 - u * qk
        qk *= q
        bound = abs(value) * math.expm1(abs(u) * qk / (1.0 - q))
        if bound <= rel_tol * abs(value) and bound < 1e-14 or value == 0.0:
            return QPochhammerEval(u, q, value, k + 1, bound)
    raise ConfigError(f"q-Pochhammer product did not settle in {max_terms} factors")


def _laplace_denominator(s, a):
    q = a * a
    return q_pochhammer(a * s, q).value + q_pochhammer(s, q).value


@dataclass(frozen=True)
class LaplaceRoot:
    s_star: float
    bracket: tuple
    lambda_a: float


@lru_cache(maxsize=64)
def laplace_root(a, tol=1e-12):
    """Bisection for the zero of (as; a^2)_inf + (s; a^2)_inf in (1, 1/a)."""
    if not 0.0 < a < 1.0:
        raise ConfigError("a must lie in (0,1)")
    lo, hi = 1.0, 1.0 / a
    f_lo = _laplace_denominator(lo, a)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = _laplace_denominator(mid, a)
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    s_star = 0.5 * (lo + hi)
    return LaplaceRoot(s_star, (lo, hi), math.log(s_star))


def laplace_lambda_a(a):
    return laplace_root(a).lambda_a


def laplace_gf(s, a):
    """E_0[s^T_0] for Laplace innovations, valid below the first pole."""
    if not 0.0 < a < 1.0:
        raise ConfigError("a must lie in (0,1)")
    q = a * a
    num = q_pochhammer(a * s, q).value
    den = num + q_pochhammer(s, q).value
    if den <= 0.0 or s >= laplace_root(a).bracket[1]:
        raise PastPole(f"s={s} is at or beyond the first pole {laplace_root(a).s_star:.12g}")
    return s * num / den


def gaussian_ou_params(a):
    """(theta, sigma^2) of dZ = -theta Z dt + sigma dW with Z_1 | Z_0 matching one
    step of the chain driven by standard normal innovations."""
    if not 0.0 < a < 1.0:
        raise ConfigError("a must lie in (0,1)")
    theta = math.log(1.0 / a)
    return theta, 2.0 * theta / (1.0 - a * a)


def pareto_lambda_a(r, a):
    if not (r > 0 and 0.0 < a < 1.0):
        raise ConfigError("need r > 0 and a in (0,1)")
    return -r * math.log(a)


@dataclass
class FiniteChainOracle:
    blocks: object
    rho: float
    V: np.ndarray
    nu: np.ndarray
    renewal_root: float


TWO_STATE_Q = ((0.4, 0.2), (0.1, 0.5))
TWO_STATE_KILL = (0.4, 0.4)


def finite_chain_blocks(Q=TWO_STATE_Q, kill=TWO_STATE_KILL, split=1):
    """KernelBlocks for a small explicit chain with states at 1, 2, ..."""
    Q = np.array(Q, dtype=float)
    n = Q.shape[0]
    nodes = np.arange(1.0, n + 1.0)
    edges = np.arange(0.5, n + 1.0)
    grid = Grid(nodes, np.ones(n), edges, np.arange(n), float(edges[split]), split, float(edges[-1]), "midpoint")
    return KernelBlocks(Q, np.array(kill, dtype=float), np.zeros(n), grid, None, "kill", np.zeros(n))


def finite_chain_oracle():
    """Two-state fixture Q = [[0.4, 0.2], [0.1, 0.5]] with kill masses (0.4, 0.4).

    rho solves rho^2 - 0.9 rho + 0.18 = 0; V and nu come from the 2x2 null
    spaces.  With A = {1}, K(z) = 0.02 z^2 / ((1 - 0.4 z)(1 - 0.5 z)) = 1 reduces
    to 0.18 z^2 - 0.9 z + 1 = 0, whose smaller root is z = 5/3.
    """
    (q11, q12), (q21, q22) = TWO_STATE_Q
    tr, det = q11 + q22, q11 * q22 - q12 * q21
    rho = 0.5 * (tr + math.sqrt(tr * tr - 4 * det))
    V = np.array([q12 / (rho - q11), 1.0])
    nu = np.array([1.0, q12 / (rho - q22)])
    nu /= nu.sum()
    V /= nu @ V
    # 1 = K(z)  <=>  det z^2 - tr z + 1 = 0
    z = (tr - math.sqrt(tr * tr - 4 * det)) / (2 * det)
    return FiniteChainOracle(finite_chain_blocks(), rho, V, nu, math.log(z))
