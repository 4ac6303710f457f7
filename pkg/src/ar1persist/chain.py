"""Simulation of the AR(1) chain and Monte Carlo estimates of its stopping times.

Monte Carlo work is split into fixed-size blocks of paths.  Block ``b`` draws
from a substream keyed by ``(seed, purpose, b)`` and blocks only return integer
counters, so every estimate is independent of the number of worker threads.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math
import zlib

import numpy as np

from .errors import ConfigError, DegenerateConditioning
from .innovations import InnovationModel

BLOCK_SIZE = 1 << 16


@dataclass(frozen=True)
class ChainParams:
    a: float
    innovation: InnovationModel

    def __post_init__(self):
        if not 0.0 < self.a < 1.0:
            raise ConfigError("a must lie in (0,1)")

    def shifted(self, r):
        """Parameters of X_n - r, which is again AR(1) with innovations xi - (1 - a) r."""
        return ChainParams(self.a, self.innovation.shifted(-(1.0 - self.a) * r))


@dataclass
class StoppingRecord:
    t0: int | None
    t_r: int | None
    sigma_r: int | None
    horizon: int
    censored: bool


@dataclass
class TrajectorySample:
    x0: float
    path: np.ndarray
    innovations_used: int


def substream(seed, *keys):
    """Independent generator for ``(seed, *keys)``; string keys are hashed."""
    spawn_key = tuple(zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in keys)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=spawn_key))


def _run_blocks(fn, n_paths, seed, purpose, threads=1):
    """Apply ``fn(rng, size)`` over path blocks and sum the returned counters."""
    sizes = [BLOCK_SIZE] * (n_paths // BLOCK_SIZE)
    if n_paths % BLOCK_SIZE:
        sizes.append(n_paths % BLOCK_SIZE)
    jobs = [(substream(seed, purpose, b), size) for b, size in enumerate(sizes)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(lambda job: fn(*job), jobs))
    else:
        results = [fn(*job) for job in jobs]
    return sum(results[1:], results[0])


def simulate_to_stop(params, x0, horizon, rng, r=0.0):
    """Run one path until it enters (-inf, 0] or ``horizon`` steps elapse.

    Returns the trajectory and the first times k >= 1 with X_k <= 0, X_k <= r
    and X_k > r seen along the simulated stretch (None if not seen).
    """
    if horizon < 1:
        raise ConfigError("horizon must be at least 1")
    a, model = params.a, params.innovation
    path = [float(x0)]
    t0 = t_r = sigma_r = None
    x = float(x0)
    used = 0
    for k in range(1, horizon + 1):
        x = a * x + float(model.sample(rng))
        used += 1
        path.append(x)
        if t_r is None and x <= r:
            t_r = k
        if sigma_r is None and x > r:
            sigma_r = k
        if x <= 0.0:
            t0 = k
            break
    record = StoppingRecord(t0, t_r, sigma_r, horizon, censored=t0 is None)
    return TrajectorySample(float(x0), np.array(path), used), record


def coupled_hitting_times(params, starts, horizon, rng, level=0.0):
    """First times k >= 1 at which X_k <= level, for several starting points
    driven by the same innovations.

    ``starts`` has shape (n_paths, m); row i shares one innovation sequence
    across its m starting points.  Censored entries are ``horizon + 1``.
    """
    a, model = params.a, params.innovation
    x = np.array(starts, dtype=float)
    hit = np.full(x.shape, horizon + 1, dtype=np.int64)
    for k in range(1, horizon + 1):
        xi = model.sample(rng, x.shape[0])
        x = a * x + xi[:, None]
        newly = (x <= level) & (hit > horizon)
        hit[newly] = k
    return hit


def wilson_interval(successes, trials, z=1.959963984540054):
    successes = np.asarray(successes, dtype=float)
    trials = np.asarray(trials, dtype=float)
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * np.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    # pin the end points exactly; rounding would otherwise exclude p = 0 or 1
    lo = np.where(successes <= 0, 0.0, np.clip(centre - half, 0.0, 1.0))
    hi = np.where(successes >= trials, 1.0, np.clip(centre + half, 0.0, 1.0))
    return lo, hi


@dataclass
class SurvivalCurve:
    """Estimates of P_x(T > n), n = 0..n_max, from a common set of paths."""

    x0: float
    n_grid: np.ndarray
    survivors: np.ndarray
    n_paths: int
    seed: int
    level: float = 0.0
    p_hat: np.ndarray = field(init=False)
    ci: np.ndarray = field(init=False)

    def __post_init__(self):
        self.p_hat = self.survivors / self.n_paths
        lo, hi = wilson_interval(self.survivors, self.n_paths)
        self.ci = np.stack([lo, hi])

    def to_csv(self, path, header_lines=()):
        with open(path, "w") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            fh.write("n,survivors,paths,p_hat,ci_lo,ci_hi\n")
            for n, s, p, lo, hi in zip(self.n_grid, self.survivors, self.p_hat, *self.ci):
                fh.write(f"{n},{s},{self.n_paths},{p:.17g},{lo:.17g},{hi:.17g}\n")


def _survival_counts(params, x0, n_max, level):
    a, model = params.a, params.innovation

    def block(rng, size):
        counts = np.zeros(n_max + 1, dtype=np.int64)
        counts[0] = size
        x = np.full(size, float(x0))
        for n in range(1, n_max + 1):
            x = a * x + model.sample(rng, x.size)
            x = x[x > level]
            counts[n] = x.size
            if x.size == 0:
                break
        return counts

    return block


def survival_curve_mc(params, x0, n_max, n_paths, seed, level=0.0, threads=1):
    """Crude Monte Carlo for P_x(T_level > n) with Wilson 95% intervals.

    Paths are compacted as they die, so the cost is proportional to the
    expected lifetime rather than to ``n_max``.
    """
    if n_paths < 100:
        raise ConfigError("n_paths must be at least 100")
    counts = _run_blocks(_survival_counts(params, x0, n_max, level), n_paths, seed, "survival", threads)
    return SurvivalCurve(float(x0), np.arange(n_max + 1), counts, int(n_paths), int(seed), float(level))


@dataclass
class ConditionalLaw:
    """Empirical law of X_n given T_0 > n over a partition of (0, inf)."""

    n: int
    edges: np.ndarray
    counts: np.ndarray
    survivors: int
    n_paths: int
    outside: int

    @property
    def probs(self):
        return self.counts / self.survivors

    @property
    def ci(self):
        return np.stack(wilson_interval(self.counts, self.survivors))


def conditional_law_mc(params, x0, n, bins, n_paths, seed, threads=1, min_survivors=50):
    """Histogram of X_n over ``bins`` among paths with T_0 > n.

    ``bins`` are ascending edges starting at 0; a final edge of ``inf`` makes
    them a partition of (0, inf).  Survivors outside the bins are counted in
    ``outside``.
    """
    edges = np.asarray(bins, dtype=float)
    a, model = params.a, params.innovation
    nb = edges.size - 1

    def block(rng, size):
        x = np.full(size, float(x0))
        for _ in range(n):
            x = a * x + model.sample(rng, x.size)
            x = x[x > 0.0]
        idx = np.searchsorted(edges, x, side="left") - 1
        inside = (idx >= 0) & (idx < nb)
        out = np.zeros(nb + 2, dtype=np.int64)
        out[:nb] = np.bincount(idx[inside], minlength=nb)
        out[nb] = x.size
        out[nb + 1] = np.count_nonzero(~inside)
        return out

    if n == 0:
        if x0 <= 0:
            raise DegenerateConditioning("starting point is already absorbed")
        tot = block(None, n_paths)
    else:
        tot = _run_blocks(block, n_paths, seed, f"conditional-{n}", threads)
    survivors = int(tot[nb])
    if survivors < min_survivors:
        raise DegenerateConditioning(f"only {survivors} survivors at n={n}")
    return ConditionalLaw(n, edges, tot[:nb], survivors, int(n_paths), int(tot[nb + 1]))


@dataclass
class FKGReport:
    ys: np.ndarray
    conditional: np.ndarray
    unconditional: np.ndarray
    se_conditional: np.ndarray
    se_unconditional: np.ndarray
    survivors: int
    n_paths: int

    @property
    def pooled_se(self):
        return np.sqrt(self.se_conditional**2 + self.se_unconditional**2)

    @property
    def worst_margin(self):
        """min over y of (conditional - unconditional) / pooled SE."""
        se = np.maximum(self.pooled_se, 1e-300)
        return float(np.min((self.conditional - self.unconditional) / se))


def fkg_check(params, x0, n, ys, n_paths, seed, threads=1):
    """Compare P(X_n > y | T_0 > n) with P(X_n > y) for the free chain."""
    ys = np.asarray(ys, dtype=float)
    a, model = params.a, params.innovation

    def block(rng, size):
        x = np.full(size, float(x0))
        alive = np.ones(size, dtype=bool)
        for _ in range(n):
            x = a * x + model.sample(rng, size)
            alive &= x > 0.0
        above = x[:, None] > ys[None, :]
        out = np.zeros(2 * ys.size + 1, dtype=np.int64)
        out[: ys.size] = above.sum(axis=0)
        out[ys.size: 2 * ys.size] = above[alive].sum(axis=0)
        out[-1] = alive.sum()
        return out

    tot = _run_blocks(block, n_paths, seed, "fkg", threads)
    survivors = int(tot[-1])
    if survivors < 50:
        raise DegenerateConditioning(f"only {survivors} survivors at n={n}")
    unc = tot[: ys.size] / n_paths
    con = tot[ys.size: 2 * ys.size] / survivors
    return FKGReport(ys, con, unc,
                     np.sqrt(con * (1 - con) / survivors), np.sqrt(unc * (1 - unc) / n_paths),
                     survivors, int(n_paths))


def free_chain_tail(params, x0, n, y, n_paths, seed, threads=1):
    """Estimate P_x(X_n >= y) for the chain without killing."""
    a, model = params.a, params.innovation

    def block(rng, size):
        x = np.full(size, float(x0))
        for _ in range(n):
            x = a * x + model.sample(rng, size)
        return np.array([np.count_nonzero(x >= y)], dtype=np.int64)

    hits = int(_run_blocks(block, n_paths, seed, "free-tail", threads)[0])
    p = hits / n_paths
    return p, math.sqrt(p * (1 - p) / n_paths)


def hitting_time_mgf_mc(params, x0, lam, n_paths, seed, level=0.0, horizon=10_000, threads=1):
    """Monte Carlo estimate of E_x[exp(lam T_level)] with its standard error.

    Paths still alive at ``horizon`` are reported in ``censored``; they are
    excluded from the mean, which is then a lower bound for lam >= 0.
    """
    a, model = params.a, params.innovation

    def block(rng, size):
        x = np.full(size, float(x0))
        s1 = s2 = 0.0
        for k in range(1, horizon + 1):
            x = a * x + model.sample(rng, x.size)
            done = x <= level
            m = np.count_nonzero(done)
            if m:
                v = math.exp(lam * k)
                s1 += m * v
                s2 += m * v * v
                x = x[~done]
            if x.size == 0:
                break
        return np.array([s1, s2, float(x.size)])

    s1, s2, censored = _run_blocks(block, n_paths, seed, "mgf", threads)
    mean = s1 / n_paths
    var = max(s2 / n_paths - mean * mean, 0.0)
    return mean, math.sqrt(var / n_paths), int(censored)


def stationary_sample(params, tolerance, rng, size=None):
    """Draw from the law of X_inf = sum_k a^(k-1) xi_k by truncating the series.

    The number of terms K is the smallest with a^K * IQR / (1 - a) < tolerance.
    """
    a, model = params.a, params.innovation
    scale = model.iqr
    K = max(1, math.ceil(math.log(tolerance * (1 - a) / scale) / math.log(a)))
    total = np.zeros(() if size is None else size)
    coef = 1.0
    for _ in range(K):
        total = total + coef * model.sample(rng, size)
        coef *= a
    return total if size is not None else float(total)
