"""Discretization of the killed transition kernel P_+ on (0, cap].

Entry (i, j) is the probability that one step from node x_i lands in the
cell attached to node x_j.  For the midpoint scheme this is the exact cell
probability F(right_j - a x_i) - F(left_j - a x_i), which agrees with the
Nystrom value phi(x_j - a x_i) w_j to quadrature order and conserves mass
exactly.  The composite Gauss-Legendre scheme (two nodes per cell) splits
each exact cell mass over the cell's nodes in proportion to the Nystrom
weights, keeping fourth order for smooth densities.

Mass leaving through 0 is the kill column; mass leaving through ``cap`` is
the overflow column, either killed (default, biases rho low) or reflected
onto the top node (biases rho high).
"""
from dataclasses import dataclass, field
from functools import cached_property
import io
import json
import math
import warnings
import zipfile

import numpy as np

from . import innovations as inn
from .chain import ChainParams
from .errors import ConfigError, DegenerateModel, DomainError, Diverges, InvalidSplit, MassDefect, NotBounded
from .linalg import perron_root

SCHEMES = ("midpoint", "gauss_legendre_composite")
POLICIES = ("kill", "reflect")

_GL2 = 0.5 / math.sqrt(3.0)


@dataclass(frozen=True)
class Grid:
    nodes: np.ndarray
    weights: np.ndarray
    edges: np.ndarray
    cell_of: np.ndarray
    r: float
    r_split: int
    cap: float
    scheme: str

    @property
    def n_nodes(self):
        return self.nodes.size

    def spec(self):
        return {"r": self.r, "cap": self.cap, "n_nodes": int(self.n_nodes), "scheme": self.scheme}

    def resplit(self, r):
        """Same nodes, threshold moved to an existing cell boundary ``r``."""
        k = int(np.argmin(np.abs(self.edges - r)))
        if not abs(self.edges[k] - r) <= 1e-12 * max(1.0, self.cap):
            raise InvalidSplit(f"r={r} is not a cell boundary of this grid")
        if not 0 < k < self.edges.size - 1:
            raise InvalidSplit("r must lie strictly inside (0, cap)")
        split = int(np.searchsorted(self.cell_of, k))
        return Grid(self.nodes, self.weights, self.edges, self.cell_of, float(self.edges[k]), split,
                    self.cap, self.scheme)


def _cells(r, cap, n_cells):
    n_a = int(round(n_cells * r / cap))
    n_a = min(max(n_a, 1), n_cells - 1)
    left = np.linspace(0.0, r, n_a + 1)
    right = np.linspace(r, cap, n_cells - n_a + 1)
    return np.concatenate([left, right[1:]]), n_a


def build_grid(params, r, cap, n_nodes, scheme="midpoint"):
    """Quadrature grid on (0, cap] with ``r`` on a cell boundary.

    Cells on (0, r] and (r, cap] are uniform, with their counts proportional
    to the lengths, so a grid with cap / r integral and a matching node count
    is uniform overall.
    """
    if scheme not in SCHEMES:
        raise ConfigError(f"unknown scheme {scheme!r}")
    if not 0 < r < cap:
        raise InvalidSplit(f"need 0 < r < cap, got r={r}, cap={cap}")
    per_cell = 1 if scheme == "midpoint" else 2
    if n_nodes % per_cell or n_nodes // per_cell < 2:
        raise ConfigError(f"{scheme} needs a multiple of {per_cell} nodes and at least two cells")
    edges, n_a = _cells(float(r), float(cap), n_nodes // per_cell)
    lo, hi = edges[:-1], edges[1:]
    mid, h = 0.5 * (lo + hi), hi - lo
    if per_cell == 1:
        nodes, weights = mid, h
        cell_of = np.arange(mid.size)
    else:
        nodes = np.column_stack([mid - _GL2 * h, mid + _GL2 * h]).ravel()
        weights = np.repeat(0.5 * h, 2)
        cell_of = np.repeat(np.arange(mid.size), 2)
    return Grid(nodes, weights, edges, cell_of, float(r), n_a * per_cell, float(cap), scheme)


def uniform_grid(cap, n_nodes, scheme="midpoint"):
    """Grid with equal cells on (0, cap]; ``r`` provisionally at the middle boundary."""
    per_cell = 1 if scheme == "midpoint" else 2
    n_cells = n_nodes // per_cell
    return build_grid(None, cap * (n_cells // 2) / n_cells, cap, n_nodes, scheme)


def _cell_masses(model, lo, hi):
    """P(lo < xi <= hi) computed on whichever side of the median is more accurate."""
    med = float(model.quantile(0.5))
    upper = lo >= med
    via_cdf = model.cdf(hi) - model.cdf(lo)
    via_sf = model.sf(lo) - model.sf(hi)
    return np.where(upper, via_sf, via_cdf)


@dataclass
class KernelBlocks:
    """Killed kernel on a grid, with the A = (0, r] / B = (r, cap] partition."""

    Q: np.ndarray
    kill: np.ndarray
    overflow: np.ndarray
    grid: Grid
    params: ChainParams | None = None
    policy: str = "kill"
    truncated: np.ndarray | None = field(default=None, repr=False)

    @property
    def r(self):
        return self.grid.r

    @property
    def split(self):
        return self.grid.r_split

    @property
    def Q_AA(self):
        return self.Q[: self.split, : self.split]

    @property
    def Q_AB(self):
        return self.Q[: self.split, self.split:]

    @property
    def Q_BA(self):
        return self.Q[self.split:, : self.split]

    @property
    def Q_BB(self):
        return self.Q[self.split:, self.split:]

    @property
    def kill_A(self):
        return self.kill[: self.split]

    @property
    def kill_B(self):
        return self.kill[self.split:]

    @property
    def overflow_A(self):
        return self.overflow[: self.split]

    @property
    def overflow_B(self):
        return self.overflow[self.split:]

    @property
    def row_totals(self):
        return self.Q.sum(axis=1) + self.kill + self.overflow

    @cached_property
    def rho_AA(self):
        return perron_root(self.Q_AA)

    @cached_property
    def rho_BB(self):
        return perron_root(self.Q_BB)

    def resplit(self, r):
        return KernelBlocks(self.Q, self.kill, self.overflow, self.grid.resplit(r), self.params,
                            self.policy, self.truncated)

    def header(self):
        return {
            "grid": self.grid.spec(),
            "model": None if self.params is None else self.params.innovation.to_config(),
            "a": None if self.params is None else self.params.a,
            "policy": self.policy,
        }


def assemble_blocks(params, grid, policy="kill", mass_tol=1e-6):
    if policy not in POLICIES:
        raise ConfigError(f"unknown overflow policy {policy!r}")
    a, model = params.a, params.innovation
    x = grid.nodes
    shift = a * x[:, None]
    lo = grid.edges[None, :-1] - shift
    hi = grid.edges[None, 1:] - shift
    cell = _cell_masses(model, lo, hi)
    if grid.scheme == "midpoint":
        Q = cell
    else:
        nys = model.pdf(x[None, :] - shift) * grid.weights[None, :]
        pair = nys.reshape(x.size, -1, 2)
        tot = pair.sum(axis=2, keepdims=True)
        frac = np.where(tot > 0, pair / np.where(tot > 0, tot, 1.0), 0.5)
        Q = (frac * cell[:, :, None]).reshape(x.size, -1)
    Q = np.clip(Q, 0.0, None)
    kill = np.asarray(model.cdf(-a * x), dtype=float)
    overflow = np.asarray(model.sf(grid.cap - a * x), dtype=float)
    totals = Q.sum(axis=1) + kill + overflow
    worst = float(np.max(np.abs(totals - 1.0)))
    if worst > mass_tol:
        raise MassDefect(f"row mass deviates from 1 by {worst:.3e}")
    truncated = overflow.copy()
    if policy == "reflect":
        Q = Q.copy()
        Q[:, -1] += overflow
        overflow = np.zeros_like(overflow)
    return KernelBlocks(Q, kill, overflow, grid, params, policy, truncated)


def default_cap(params, unit=1.0, threshold=1e-10, max_doublings=40):
    """Smallest unit * 2**k with one-step overflow below ``threshold`` from every node.

    Laws bounded above get the invariant upper end R / (1 - a) instead, where
    overflow vanishes identically.
    """
    a, model = params.a, params.innovation
    info = inn.classify_tail(model, a)
    if info.tail_class is inn.TailClass.BOUNDED_ABOVE:
        if not info.r_star > 0:
            raise DegenerateModel("innovations bounded above by a nonpositive level never survive")
        return info.r_star
    cap = unit
    for _ in range(max_doublings):
        if model.sf((1 - a) * cap) < threshold:
            return cap
        cap *= 2.0
    raise Diverges(f"overflow stays above {threshold} for caps up to {cap:g}")


def select_threshold(blocks, lambda_est, boost=0.1, margin=0.9):
    """Smallest cell boundary r with exp(lambda_est + boost) * rho(Q_BB) < margin.

    The spectral radius of Q_BB is nonincreasing in r, so the boundaries are
    bisected.
    """
    grid = blocks.grid
    edges = grid.edges
    factor = math.exp(lambda_est + boost)

    def ok(k):
        return factor * blocks.resplit(edges[k]).rho_BB < margin

    lo, hi = 1, edges.size - 2
    if not ok(hi):
        raise DomainError("no threshold r below cap satisfies the spectral-radius margin")
    while lo < hi:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid + 1
    return float(edges[lo])


def minorization_constant(model, y0, mesh=10_001):
    """Infimum of the density over [R - y0, R] for a law bounded above by R."""
    info = inn.classify_tail(model)
    if info.tail_class is not inn.TailClass.BOUNDED_ABOVE:
        raise NotBounded(f"{model.kind} innovations are not bounded above")
    R = info.ess_sup
    # closed at R from the left: evaluate just inside the support
    ys = np.linspace(R - y0, R, mesh)
    ys[-1] = np.nextafter(R, -np.inf)
    kappa = float(np.min(model.pdf(ys)))
    if kappa == 0.0:
        warnings.warn("density vanishes near the right end of its support; minorization constant is 0")
    return kappa


@dataclass
class LambdaWeight:
    lambda_tilde: float
    M: float
    nodes: np.ndarray
    values: np.ndarray
    finite: bool


def lambda_weight(blocks, M, lambda_tilde, strict=True):
    """Weight Lambda(x) = E_x[exp(lambda_tilde T_M)] on the nodes above M.

    Solves Lambda = z (P(X_1 <= M) + Q_{>M,>M} Lambda), z = exp(lambda_tilde),
    for the chain without killing (landing below 0 counts as landing <= M).
    """
    grid, params = blocks.grid, blocks.params
    k = int(np.argmin(np.abs(grid.edges - M)))
    if abs(grid.edges[k] - M) > 1e-12 * max(1.0, grid.cap) or M > grid.r + 1e-12:
        raise ConfigError("M must be a cell boundary not above r")
    above = grid.nodes > M
    P = blocks.Q[np.ix_(above, above)]
    to_low = params.innovation.cdf(M - params.a * grid.nodes[above])
    z = math.exp(lambda_tilde)
    rho = perron_root(P)
    if z * rho >= 1.0:
        if strict:
            raise Diverges(f"exp(lambda_tilde) * rho = {z * rho:.6f} >= 1")
        return LambdaWeight(lambda_tilde, float(M), grid.nodes[above], np.full(above.sum(), np.inf), False)
    values = np.linalg.solve(np.eye(P.shape[0]) - z * P, z * to_low)
    return LambdaWeight(lambda_tilde, float(M), grid.nodes[above], values, True)


@dataclass
class QuasicompactReport:
    sup_ratio: float
    bound: float
    margin: float
    holds: bool
    max_overflow: float
    cause: str | None


def quasicompact_diagnostic(blocks, weight, truncation_level=1e-3):
    """Discrete check of |U_3|_Lambda <= exp(-lambda_tilde) on the nodes above M.

    Since Lambda = z (P(X_1 <= M) + Q Lambda), the ratio (Q Lambda) / Lambda
    equals exp(-lambda_tilde) - P(X_1 <= M) / Lambda: the bound holds on the
    truncated grid by construction and its margin closes at the top nodes.
    What can break it is mass lost through the cap, charged here at
    Lambda(top node), a lower bound for its true weight since Lambda is
    nondecreasing.  A violation while that overflow exceeds
    ``truncation_level`` is attributed to truncation.
    """
    if not weight.finite:
        raise Diverges("weight is not finite")
    above = blocks.grid.nodes > weight.M
    P = blocks.Q[np.ix_(above, above)]
    lam = weight.values
    ov = blocks.overflow[above]
    ratio = (P @ lam + ov * lam[-1]) / lam
    sup = float(np.max(ratio))
    bound = math.exp(-weight.lambda_tilde)
    holds = sup <= bound + 1e-8
    max_ov = float(np.max(blocks.truncated[above])) if blocks.truncated is not None else float(np.max(ov))
    cause = None
    if not holds:
        cause = "truncation" if max_ov > truncation_level else "bound"
    return QuasicompactReport(sup, bound, bound - sup, holds, max_ov, cause)


def save_blocks(blocks, path, extra_header=None):
    """Write the kernel to an ``.npz`` container with a JSON header entry.

    Archive members get a fixed timestamp so identical kernels give
    identical files.
    """
    header = blocks.header()
    if extra_header:
        header.update(extra_header)
    g = blocks.grid
    arrays = {
        "header": np.array(json.dumps(header, sort_keys=True)), "Q": blocks.Q, "kill": blocks.kill,
        "overflow": blocks.overflow,
        "truncated": blocks.truncated if blocks.truncated is not None else blocks.overflow,
        "nodes": g.nodes, "weights": g.weights, "edges": g.edges, "cell_of": g.cell_of,
        "split": np.array([g.r_split]),
    }
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for name, arr in arrays.items():
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.asarray(arr), allow_pickle=False)
            zf.writestr(zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0)), buf.getvalue())


def load_blocks(path):
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        gs = header["grid"]
        grid = Grid(data["nodes"], data["weights"], data["edges"], data["cell_of"], float(gs["r"]),
                    int(data["split"][0]), float(gs["cap"]), gs["scheme"])
        params = None
        if header.get("model") is not None:
            params = ChainParams(header["a"], inn.from_config(header["model"]))
        return KernelBlocks(data["Q"], data["kill"], data["overflow"], grid, params, header["policy"],
                            data["truncated"]), header
