"""Leading eigentriple of the discretized killed kernel.

The Perron root rho = exp(-lambda_a) of Q comes with a right vector V
(the exp(lambda_a)-harmonic function) and a left vector nu (the
quasi-stationary law on the grid), normalized so that sum(nu) = 1 and
nu . V = 1.  The spectral projector is then f -> (nu . f) V and

    P_x(T_0 > n) ~ V(x) exp(-lambda_a n).
"""
from dataclasses import dataclass, field
import json
import math

import numpy as np

from . import innovations as inn
from . import kernel
from .errors import DegenerateKernel, DegenerateModel, OutOfRange, SeriesDiverges
from .linalg import perron_vector


@dataclass
class EigenTriple:
    rho: float
    V: np.ndarray
    nu: np.ndarray
    residual: float
    iterations: int
    nodes: np.ndarray | None = field(default=None, repr=False)
    weights: np.ndarray | None = field(default=None, repr=False)
    gap_proxy: float | None = None

    @property
    def lambda_a(self):
        return -math.log(self.rho)

    def scalars(self):
        return {"rho": self.rho, "lambda_a": self.lambda_a, "residual": self.residual,
                "iterations": self.iterations, "gap_proxy": self.gap_proxy}

    def to_csv(self, path, header_lines=()):
        with open(path, "w") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            fh.write("node,weight,V,nu\n")
            for x, w, v, q in zip(self.nodes, self.weights, self.V, self.nu):
                fh.write(f"{x:.17g},{w:.17g},{v:.17g},{q:.17g}\n")

    def to_json(self, path, extra=None):
        out = dict(extra or {})
        out.update(self.scalars())
        with open(path, "w") as fh:
            json.dump(out, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _gap_proxy(Q, v, rho, steps=40):
    """Crude |rho_2| / rho from the decay of the deflated residual of a few
    extra power steps started off the Perron vector."""
    n = Q.shape[0]
    if n < 2:
        return None
    w = np.linspace(1.0, 2.0, n)
    w -= (w @ v) / (v @ v) * v
    norms = []
    for _ in range(steps):
        w = Q @ w
        w -= (w @ v) / (v @ v) * v
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        norms.append(nw)
        w /= nw
    return float(np.exp(np.mean(np.log(norms[-5:]))) / rho)


def leading_eigentriple(blocks, tol=1e-12, max_iter=100_000):
    """Perron root and vectors of the kernel matrix in ``blocks``.

    ``blocks`` may also be a bare square matrix.  Raises DegenerateKernel when
    the matrix is zero or conserves mass on every row (no killing, rho = 1).
    """
    if isinstance(blocks, kernel.KernelBlocks):
        Q, nodes, weights = blocks.Q, blocks.grid.nodes, blocks.grid.weights
        losses = blocks.kill + blocks.overflow
        if np.all(losses <= 1e-15):
            raise DegenerateKernel("kernel is stochastic: no mass is ever killed, so rho = 1 and lambda_a = 0")
    else:
        Q = np.asarray(blocks, dtype=float)
        nodes = np.arange(1, Q.shape[0] + 1, dtype=float)
        weights = np.ones(Q.shape[0])
    start = np.ones(Q.shape[0])
    rho, V, res_r, it_r = perron_vector(Q, tol=tol, max_iter=max_iter, start=start)
    rho_l, nu, res_l, it_l = perron_vector(Q.T, tol=tol, max_iter=max_iter, start=start)
    if not rho > 0:
        raise DegenerateKernel("spectral radius is zero")
    if rho >= 1.0:
        raise DegenerateKernel(f"spectral radius {rho} is not below 1")
    nu = nu / nu.sum()
    V = V / (nu @ V)
    residual = float(np.max(np.abs(Q @ V - rho * V)) / np.max(np.abs(V)))
    return EigenTriple(rho, V, nu, residual, max(it_r, it_l), np.asarray(nodes, dtype=float),
                       np.asarray(weights, dtype=float), _gap_proxy(Q, V, rho))


def interpolate_V(triple, x, cap):
    """V at ``x`` by linear interpolation, flat extrapolation below the first node."""
    x = np.asarray(x, dtype=float)
    if np.any(x > cap) or np.any(x < 0):
        raise OutOfRange(f"x must lie in [0, {cap}]")
    return np.interp(x, triple.nodes, triple.V)


def survival_prediction(triple, x, n, grid):
    """Tail prediction for P_x(T_0 > n).

    With point masses P_x(T_0 = k) ~ c V(x) exp(-lambda_a k) the tail sum is
    c V(x) exp(-lambda_a (n + 1)) / (1 - exp(-lambda_a)); the constant is
    fixed by the normalization nu . V = 1, under which the tail reduces to
    V(x) exp(-lambda_a n).  The closed form is kept so its geometric shape is
    explicit.
    """
    lam = triple.lambda_a
    q = math.exp(-lam)
    v = interpolate_V(triple, x, grid.cap)
    v_point = v * (1 - q) / q  # prefactor of the point masses
    return v_point * np.exp(-lam * (np.asarray(n, dtype=float) + 1)) / (1 - q)


def harmonic_residual(triple, blocks):
    Q = blocks.Q if isinstance(blocks, kernel.KernelBlocks) else np.asarray(blocks, dtype=float)
    V = triple.V
    return float(np.max(np.abs(Q @ V / triple.rho - V)) / np.max(np.abs(V)))


def qsd_fixed_point_error(triple, blocks):
    """l1 distance between nu and its one-step conditioned image nu Q / (nu Q 1)."""
    Q = blocks.Q if isinstance(blocks, kernel.KernelBlocks) else np.asarray(blocks, dtype=float)
    img = triple.nu @ Q
    return float(np.abs(img / img.sum() - triple.nu).sum())


def nu_cdf(triple, x):
    """Distribution function of nu treating each node's mass as spread over its cell."""
    nodes, w, nu = triple.nodes, triple.weights, triple.nu
    lo = nodes - 0.5 * w
    x = np.atleast_1d(np.asarray(x, dtype=float))
    frac = np.clip((x[:, None] - lo[None, :]) / w[None, :], 0.0, 1.0)
    return frac @ nu


def check_supported(params):
    """Refuse models outside the reach of the finite-matrix pipelines."""
    model = params.innovation
    if not model.cdf(0.0) > 0.0:
        raise DegenerateModel("P(xi <= 0) = 0: the chain is never killed, lambda_a = 0")
    info = inn.classify_tail(model, params.a)
    if info.tail_class is inn.TailClass.REGULARLY_VARYING:
        raise SeriesDiverges(
            "B",
            f"regularly varying right tail (index {info.tail_index}): exponential moments of return times "
            "from high levels are infinite, so the excursion series diverges for every lambda > 0",
        )
    return info


@dataclass
class SpectralRun:
    triple: EigenTriple
    blocks: kernel.KernelBlocks
    cap: float
    n_nodes: int


def spectrum_for(params, n_nodes=400, cap=None, r=None, scheme="midpoint", policy="kill", tol=1e-12,
                 max_iter=100_000):
    """Discretize, assemble and solve in one call for a supported model."""
    check_supported(params)
    cap = kernel.default_cap(params) if cap is None else float(cap)
    if r is None:
        grid = kernel.uniform_grid(cap, n_nodes, scheme)
    else:
        grid = kernel.build_grid(params, r, cap, n_nodes, scheme)
    blocks = kernel.assemble_blocks(params, grid, policy)
    triple = leading_eigentriple(blocks, tol=tol, max_iter=max_iter)
    return SpectralRun(triple, blocks, cap, n_nodes)
