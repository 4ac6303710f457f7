"""Perron roots and vectors of nonnegative matrices.

Plain power iteration, accelerated every few sweeps by one inverse-iteration
step shifted to the Collatz-Wielandt upper bound max_i (Mv)_i / v_i.  That
shift is never below the spectral radius, so the Perron root is always the
eigenvalue closest to it and the accelerated step cannot lock onto another
part of the spectrum.
"""
import warnings

import numpy as np
from scipy import linalg as sla

from .errors import DegenerateKernel, NoConvergence


def _cw_upper(v, w):
    pos = v > 0
    if np.any(w[~pos] > 0):
        return np.inf
    return float(np.max(w[pos] / v[pos]))


def perron_vector(M, tol=1e-12, max_iter=100_000, accel_every=10, start=None):
    """Dominant eigenpair of a nonnegative matrix by accelerated power iteration.

    Returns ``(rho, v, residual, iterations)`` with ``v`` scaled to unit sup
    norm and ``residual = |Mv - rho v|_inf / |v|_inf``.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if not np.any(M):
        raise DegenerateKernel("matrix is identically zero")
    v = np.ones(n) if start is None else np.array(start, dtype=float)
    v /= np.max(np.abs(v))
    residual = np.inf
    for it in range(1, max_iter + 1):
        w = M @ v
        rho = float(v @ w / (v @ v))
        residual = float(np.max(np.abs(w - rho * v)) / np.max(np.abs(v)))
        if residual <= tol:
            return rho, v, residual, it
        sigma = _cw_upper(v, w) if it % accel_every == 0 else np.inf
        if np.isfinite(sigma) and sigma > 0:
            sigma *= 1 + 1e-13
            try:
                # near-singular by design: sigma sits just above rho
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", sla.LinAlgWarning)
                    y = sla.solve(M - sigma * np.eye(n), v)
            except (sla.LinAlgError, ValueError):
                y = None
            if y is not None and np.all(np.isfinite(y)) and np.any(y):
                y = -y if y.sum() < 0 else y
                v = np.clip(y, 0.0, None) / np.max(np.abs(y))
                if np.any(v):
                    continue
        if not np.any(w):
            raise DegenerateKernel("iterate vanished: matrix is nilpotent on the start vector")
        v = w / np.max(np.abs(w))
    raise NoConvergence(max_iter, residual)


def perron_root(M, tol=1e-13, max_iter=100_000):
    """Spectral radius of a nonnegative matrix (0 for the zero matrix)."""
    M = np.asarray(M, dtype=float)
    if M.size == 0 or not np.any(M):
        return 0.0
    try:
        rho, _, _, _ = perron_vector(M, tol=tol, max_iter=max_iter)
    except (NoConvergence, DegenerateKernel):
        return float(np.max(np.abs(np.linalg.eigvals(M))))
    return rho
