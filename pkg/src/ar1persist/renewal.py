"""Renewal decomposition of E_x[exp(lambda T_0)] around the level r.

Split the grid into A = (0, r] and B = (r, cap].  With z = exp(lambda),
paths from A either die before returning to A (vector F) or come back to A
after an excursion through B (matrix K):

    F = z R_A kill_A + z^2 R_A Q_AB R_B kill_B
    K = z^2 R_A Q_AB R_B Q_BA,          R_X = (I - z Q_XX)^{-1}

and u = E[exp(lambda T_0)] on A solves u = F + K u.  The persistence
exponent is the smallest lambda > 0 with r(K_lambda) = 1, which on the same
matrix coincides with -log rho(Q) by the Schur complement identity.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy import linalg as sla

from . import innovations as inn
from . import kernel
from .chain import hitting_time_mgf_mc
from .spectral import check_supported
from .errors import BadBracket, DomainError, DomainExceeded, InvalidRatio, SeriesDiverges, SingularAtRoot


@dataclass
class RenewalSystem:
    lam: float
    F: np.ndarray
    K: np.ndarray
    valid_A: bool
    valid_B: bool
    spectral_radius_K: float


def _radius(M):
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def assemble(blocks, lam):
    z = math.exp(lam)
    valid_A = z * blocks.rho_AA < 1.0
    valid_B = z * blocks.rho_BB < 1.0
    if not valid_A:
        raise SeriesDiverges("A", f"exp(lambda) * rho(Q_AA) = {z * blocks.rho_AA:.6g} >= 1")
    if not valid_B:
        raise SeriesDiverges("B", f"exp(lambda) * rho(Q_BB) = {z * blocks.rho_BB:.6g} >= 1")
    nA = blocks.split
    nB = blocks.Q.shape[0] - nA
    lu_A = sla.lu_factor(np.eye(nA) - z * blocks.Q_AA)
    # R_B [kill_B | Q_BA] in one solve
    rhs = np.column_stack([blocks.kill_B, blocks.Q_BA])
    through_B = sla.solve(np.eye(nB) - z * blocks.Q_BB, rhs)
    excursion = z * z * (blocks.Q_AB @ through_B)
    F = sla.lu_solve(lu_A, z * blocks.kill_A + excursion[:, 0])
    K = sla.lu_solve(lu_A, excursion[:, 1:])
    K = np.clip(K, 0.0, None)
    return RenewalSystem(float(lam), F, K, True, True, _radius(K))


def solve_renewal(system, singular_tol=1e-10):
    if abs(system.spectral_radius_K - 1.0) <= singular_tol:
        raise SingularAtRoot(f"r(K) = {system.spectral_radius_K!r} is within {singular_tol} of 1")
    n = system.K.shape[0]
    return sla.solve(np.eye(n) - system.K, system.F)


def full_grid_resolvent(blocks, lam):
    """z (I - z Q)^{-1} kill on every node: the discrete E_x[exp(lambda T_0)]."""
    z = math.exp(lam)
    n = blocks.Q.shape[0]
    return sla.solve(np.eye(n) - z * blocks.Q, z * blocks.kill)


@dataclass
class RootResult:
    lambda_star: float
    bracket: tuple
    iterations: int
    trace: list = field(default_factory=list)

    def trace_csv(self, path, header_lines=()):
        with open(path, "w") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            fh.write("lambda,rho_K,valid_A,valid_B\n")
            for lam, rk, va, vb in self.trace:
                fh.write(f"{lam:.17g},{rk:.17g},{int(va)},{int(vb)}\n")


def validity_limit(blocks):
    """Supremum of lambda for which both geometric series converge."""
    worst = max(blocks.rho_AA, blocks.rho_BB)
    return math.inf if worst == 0 else -math.log(worst)


def find_lambda_root(blocks, bracket=None, tol=1e-12, max_iter=200):
    """Bisect r(K_lambda) = 1 inside the validity domain.

    The default bracket is (0, limit) with the upper end pulled in by a
    relative 1e-9 from the validity limit.
    """
    limit = validity_limit(blocks)
    if bracket is None:
        lo, hi = 0.0, limit * (1 - 1e-9)
    else:
        lo, hi = map(float, bracket)
        if hi >= limit:
            raise DomainExceeded(f"upper end {hi} reaches the validity limit {limit:.12g}")
    if not lo < hi:
        raise BadBracket(f"empty bracket ({lo}, {hi})")
    trace = []

    def radius(lam):
        s = assemble(blocks, lam)
        trace.append((lam, s.spectral_radius_K, s.valid_A, s.valid_B))
        return s.spectral_radius_K

    r_lo, r_hi = radius(lo), radius(hi)
    if not (r_lo < 1.0 < r_hi):
        raise BadBracket(f"r(K) does not cross 1 on ({lo}, {hi}): r(K_lo) = {r_lo:.6g}, r(K_hi) = {r_hi:.6g}")
    it = 0
    while hi - lo > tol and it < max_iter:
        mid = 0.5 * (lo + hi)
        if radius(mid) < 1.0:
            lo = mid
        else:
            hi = mid
        it += 1
    return RootResult(0.5 * (lo + hi), (lo, hi), it, trace)


def renewal_for(params, n_nodes=400, cap=None, scheme="midpoint", policy="kill", tol=1e-12, blocks=None):
    """Renewal root with the threshold chosen by the spectral-radius margin policy.

    The policy needs an estimate of lambda_a.  The threshold is first chosen
    for the estimate 0, the root found there supplies the estimate, and the
    threshold is moved up once more before the final solve.
    """
    if blocks is None:
        check_supported(params)
        cap = kernel.default_cap(params) if cap is None else float(cap)
        blocks = kernel.assemble_blocks(params, kernel.uniform_grid(cap, n_nodes, scheme), policy)
    blocks = blocks.resplit(kernel.select_threshold(blocks, 0.0))
    first = find_lambda_root(blocks, tol=1e-6)
    blocks = blocks.resplit(kernel.select_threshold(blocks, first.lambda_star))
    return find_lambda_root(blocks, tol=tol), blocks


def coming_down_bound(params, r, A_ratio, lam, x0):
    """Bound 2 e^lam (x0 / r)^(lam / log A) on E_x0[exp(lam T_r)] for x0 >= r."""
    a = params.a
    if not 1.0 < A_ratio < 1.0 / a:
        raise InvalidRatio(f"A_ratio must lie in (1, {1 / a:g})")
    info = inn.classify_tail(params.innovation, a)
    if not info.all_power_moments:
        raise DomainError("bound needs all power moments of the positive part of xi")
    if x0 < r:
        raise DomainError("x0 must be at least r")
    return 2.0 * math.exp(lam) * (x0 / r) ** (lam / math.log(A_ratio))


@dataclass
class ComingDownCheck:
    bound: float
    estimate: float
    stderr: float
    censored: int
    holds: bool


def coming_down_check(params, r, A_ratio, lam, x0, n_paths, seed, threads=1, z=1.959963984540054):
    """Monte Carlo companion of ``coming_down_bound``: does the lower end of
    the 95% interval for E_x0[exp(lam T_r)] stay below the bound?"""
    bound = coming_down_bound(params, r, A_ratio, lam, x0)
    est, se, cens = hitting_time_mgf_mc(params, x0, lam, n_paths, seed, level=r, threads=threads)
    return ComingDownCheck(bound, est, se, cens, est - z * se <= bound)
