"""Command line front end.

    ar1persist {spectrum,renewal,mc,fv,oracle,compare} --config run.toml --out DIR [--seed N] [--threads N]

Every artifact carries the validated configuration and the seed, and none
carries a timestamp, so a repeated run reproduces its files byte for byte.
Exit codes: 0 success, 2 configuration error, 3 numerical-domain error,
4 non-convergence.  Errors are also written to ``DIR/error.json``.
"""
import argparse
import json
import math
import os
import sys

import numpy as np

from . import estimators, innovations as inn, kernel, oracles, renewal, spectral
from .chain import survival_curve_mc
from .config import load_config
from .errors import ArtifactError, ConfigError, DomainError


class Run:
    """Output directory plus the provenance header stamped on every file."""

    def __init__(self, cfg, out):
        self.cfg = cfg
        self.out = out
        os.makedirs(out, exist_ok=True)
        self.header = {"config": cfg.model_dump(mode="json"), "seed": cfg.seed, "threads": cfg.threads}

    def path(self, name):
        return os.path.join(self.out, name)

    @property
    def csv_header(self):
        return [f"config: {json.dumps(self.header['config'], sort_keys=True)}",
                f"seed: {self.cfg.seed}", f"threads: {self.cfg.threads}"]

    def write_json(self, name, payload):
        doc = dict(self.header)
        doc.update(payload)
        with open(self.path(name), "w") as fh:
            json.dump(_plain(doc), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return doc


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _cap(cfg, params):
    return kernel.default_cap(params) if cfg.grid.cap == "auto" else float(cfg.grid.cap)


def _blocks(cfg, n_nodes=None, cap=None, policy=None):
    if cfg.fixture == "two_state":
        return oracles.finite_chain_blocks()
    params = cfg.params()
    spectral.check_supported(params)
    g = cfg.grid
    cap = _cap(cfg, params) if cap is None else cap
    n_nodes = g.n_nodes if n_nodes is None else n_nodes
    if g.r is None:
        grid = kernel.uniform_grid(cap, n_nodes, g.scheme)
    else:
        grid = kernel.build_grid(params, g.r, cap, n_nodes, g.scheme)
    return kernel.assemble_blocks(params, grid, policy or g.policy)


def _triple(cfg, blocks):
    return spectral.leading_eigentriple(blocks, tol=cfg.spectral.tol, max_iter=cfg.spectral.max_iter)


def cmd_spectrum(run):
    cfg = run.cfg
    blocks = _blocks(cfg)
    triple = _triple(cfg, blocks)
    triple.to_csv(run.path("eigentriple.csv"), run.csv_header)
    kernel.save_blocks(blocks, run.path("blocks.npz"), {"seed": cfg.seed, "config": run.header["config"]})
    scalars = triple.scalars()
    scalars.update(harmonic_residual=spectral.harmonic_residual(triple, blocks),
                   qsd_fixed_point_error=spectral.qsd_fixed_point_error(triple, blocks),
                   cap=blocks.grid.cap, n_nodes=int(blocks.grid.n_nodes), policy=blocks.policy,
                   max_overflow=float(np.max(blocks.truncated)))
    if cfg.fixture is None and cfg.grid.refine:
        rows = []
        params = cfg.params()
        cap, n = blocks.grid.cap, cfg.grid.n_nodes
        # the cap of a law bounded above is exact and is never doubled
        bounded = inn.classify_tail(params.innovation, params.a).tail_class is inn.TailClass.BOUNDED_ABOVE
        big = cap if bounded else 2 * cap
        for nn, cc, pol in [(n // 2, cap, "kill"), (n, cap, "kill"), (2 * n, cap, "kill"),
                            (2 * n, big, "kill"), (n, cap, "reflect"), (2 * n, big, "reflect")]:
            t = _triple(cfg, _blocks(cfg, nn, cc, pol))
            rows.append((nn, cc, pol, t.lambda_a))
        with open(run.path("convergence.csv"), "w") as fh:
            for line in run.csv_header:
                fh.write(f"# {line}\n")
            fh.write("n_nodes,cap,policy,lambda_a\n")
            for nn, cc, pol, lam in rows:
                fh.write(f"{nn},{cc:.17g},{pol},{lam:.17g}\n")
    run.write_json("scalars.json", scalars)
    return scalars


def cmd_renewal(run):
    cfg = run.cfg
    blocks = _blocks(cfg)
    if cfg.renewal.bracket is not None or cfg.fixture is not None or cfg.grid.r is not None:
        root = renewal.find_lambda_root(blocks, cfg.renewal.bracket, tol=cfg.renewal.tol)
    else:
        root, blocks = renewal.renewal_for(None, blocks=blocks, tol=cfg.renewal.tol)
    root.trace_csv(run.path("renewal_trace.csv"), run.csv_header)
    out = {"lambda_star": root.lambda_star, "bracket": list(root.bracket), "iterations": root.iterations,
           "r": blocks.r, "n_nodes": int(blocks.grid.n_nodes), "cap": blocks.grid.cap}
    run.write_json("root.json", out)
    return out


def cmd_mc(run):
    cfg, m = run.cfg, run.cfg.mc
    params = cfg.params()
    curve = survival_curve_mc(params, m.x0, m.n_max, m.n_paths, cfg.seed, level=m.level, threads=cfg.threads)
    curve.to_csv(run.path("survival.csv"), run.csv_header)
    out = {"x0": m.x0, "n_paths": m.n_paths, "survival_identically_one": bool(np.all(curve.survivors == m.n_paths))}
    lo, hi = m.window
    if hi <= m.n_max:
        fit = estimators.lambda_from_slope(curve, (lo, hi))
        out.update(lambda_hat=fit.lambda_hat, stderr=fit.stderr, chi2_per_dof=fit.chi2_per_dof, window=[lo, hi])
    run.write_json("mc.json", out)
    return out


def cmd_fv(run):
    cfg, f = run.cfg, run.cfg.fv
    res = estimators.fleming_viot(cfg.params(), f.n_particles, f.n_steps, f.burn_in, cfg.seed, bins=f.bins,
                                  threads=cfg.threads)
    res.trace_csv(run.path("fv_trace.csv"), run.csv_header)
    with open(run.path("fv_qsd.csv"), "w") as fh:
        for line in run.csv_header:
            fh.write(f"# {line}\n")
        fh.write("bin_lo,bin_hi,mass\n")
        for lo, hi, mass in zip(res.edges[:-1], res.edges[1:], res.histogram):
            fh.write(f"{lo:.17g},{hi:.17g},{mass:.17g}\n")
    out = {"lambda_hat": res.lambda_hat, "n_particles": f.n_particles, "n_steps": f.n_steps, "burn_in": f.burn_in,
           "total_kills": int(res.ensemble.kill_events_per_step.sum())}
    run.write_json("fv.json", out)
    return out


def _oracle_values(cfg):
    kind = cfg.oracle.kind
    if kind is None:
        kind = "two_state" if cfg.chain is None else cfg.params().innovation.kind
    if kind == "two_state":
        o = oracles.finite_chain_oracle()
        return {"kind": kind, "rho": o.rho, "lambda_a": -math.log(o.rho), "V": o.V, "nu": o.nu,
                "renewal_root": o.renewal_root}
    a = cfg.params().a
    if kind == "laplace":
        root = oracles.laplace_root(a)
        return {"kind": kind, "a": a, "s_star": root.s_star, "bracket": list(root.bracket), "lambda_a": root.lambda_a}
    if kind == "gaussian":
        theta, sigma_sq = oracles.gaussian_ou_params(a)
        return {"kind": kind, "a": a, "theta": theta, "sigma_sq": sigma_sq}
    if kind == "pareto":
        r = cfg.params().innovation.tail_index
        return {"kind": kind, "a": a, "tail_index": r, "lambda_a": oracles.pareto_lambda_a(r, a)}
    raise DomainError(f"no closed form is available for {kind} innovations")


def cmd_oracle(run):
    out = _oracle_values(run.cfg)
    doc = run.write_json("oracle.json", out)
    print(json.dumps(_plain(out), sort_keys=True))
    return doc


def cmd_compare(run):
    cfg, c = run.cfg, run.cfg.compare
    # every check is measured against the spectral value, so it always runs
    spec = cmd_spectrum(run)
    est = {"spectral": {"lambda_a": spec["lambda_a"], "residual": spec["residual"]}}
    checks = {}
    if "renewal" in c.pipelines:
        root = cmd_renewal(run)
        d = abs(root["lambda_star"] - spec["lambda_a"])
        est["renewal"] = {"lambda_a": root["lambda_star"], "delta": d, "budget": c.renewal_abs}
        checks["renewal"] = d <= c.renewal_abs
    if "mc" in c.pipelines and cfg.chain is not None:
        mc = cmd_mc(run)
        d = abs(mc["lambda_hat"] - spec["lambda_a"])
        est["slope"] = {"lambda_a": mc["lambda_hat"], "stderr": mc["stderr"], "delta": d,
                        "budget": c.slope_sigmas * mc["stderr"]}
        checks["slope"] = d <= c.slope_sigmas * mc["stderr"]
    if "fv" in c.pipelines and cfg.chain is not None:
        fv = cmd_fv(run)
        rel = abs(fv["lambda_hat"] / spec["lambda_a"] - 1)
        est["fv"] = {"lambda_a": fv["lambda_hat"], "relative_delta": rel, "budget": c.fv_rel}
        checks["fv"] = rel <= c.fv_rel
    if "oracle" in c.pipelines:
        try:
            o = _oracle_values(cfg)
        except DomainError:
            o = {}
        if "lambda_a" in o:
            d = abs(o["lambda_a"] - spec["lambda_a"])
            est["oracle"] = {"lambda_a": o["lambda_a"], "delta": d, "budget": c.oracle_abs}
            checks["oracle"] = d <= c.oracle_abs
    out = {"estimates": est, "checks": checks, "all_pass": all(checks.values())}
    run.write_json("comparison.json", out)
    return out


COMMANDS = {"spectrum": cmd_spectrum, "renewal": cmd_renewal, "mc": cmd_mc, "fv": cmd_fv,
            "oracle": cmd_oracle, "compare": cmd_compare}


def build_parser():
    parser = argparse.ArgumentParser(prog="ar1persist", description="Persistence exponents of killed AR(1) chains.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="TOML run configuration")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    parser.add_argument("--threads", type=int, default=None, help="worker threads for Monte Carlo blocks")
    return parser


def _fail(exc, out):
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
    print(json.dumps(err), file=sys.stderr)
    try:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "error.json"), "w") as fh:
            json.dump(err, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError:
        pass
    return exc.exit_code


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        update = {}
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("seed must be an unsigned 64-bit integer")
            update["seed"] = args.seed
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("threads must be positive")
            update["threads"] = args.threads
        cfg = cfg.model_copy(update=update)
        COMMANDS[args.command](Run(cfg, args.out))
    except ArtifactError as exc:
        return _fail(exc, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
