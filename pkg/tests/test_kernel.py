import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ar1persist import kernel, spectral
from ar1persist.chain import ChainParams
from ar1persist.errors import ConfigError, Diverges, InvalidSplit, MassDefect, NotBounded
from ar1persist.innovations import Gaussian, Laplace, TwoSidedPareto, Uniform
from ar1persist.linalg import perron_root

GAUSS = ChainParams(0.5, Gaussian())
LAPLACE = ChainParams(0.5, Laplace())
UNIFORM = ChainParams(0.5, Uniform(-1, 1))


def test_small_uniform_grid():
    g = kernel.build_grid(None, 2.0, 4.0, 4)
    assert np.array_equal(g.nodes, [0.5, 1.5, 2.5, 3.5])
    assert np.array_equal(g.weights, [1.0, 1.0, 1.0, 1.0])
    assert g.r_split == 2


def test_split_at_cap_rejected():
    with pytest.raises(InvalidSplit):
        kernel.build_grid(UNIFORM, 2.0, 2.0, 64)
    with pytest.raises(InvalidSplit):
        kernel.build_grid(UNIFORM, 0.0, 2.0, 64)


@settings(max_examples=40, deadline=None)
@given(r=st.floats(0.05, 0.95), cap=st.floats(1.0, 50.0), n=st.integers(8, 200),
       scheme=st.sampled_from(kernel.SCHEMES))
def test_grid_invariants(r, cap, n, scheme):
    n -= n % 2
    g = kernel.build_grid(None, r * cap, cap, n, scheme)
    assert np.all(np.diff(g.nodes) > 0) and np.all(g.weights > 0)
    assert g.weights.sum() == pytest.approx(cap, rel=1e-12)
    assert 0 < g.nodes[0] and g.nodes[-1] < cap
    assert np.all(g.nodes[: g.r_split] < g.r) and np.all(g.nodes[g.r_split:] > g.r)
    assert g.r in g.edges


def test_resplit_moves_threshold_only():
    g = kernel.uniform_grid(8.0, 80)
    h = g.resplit(g.edges[10])
    assert h.r_split == 10 and np.array_equal(h.nodes, g.nodes)
    with pytest.raises(InvalidSplit):
        g.resplit(0.123456)


@pytest.mark.parametrize("params", [GAUSS, LAPLACE, UNIFORM], ids=["gauss", "laplace", "uniform"])
@pytest.mark.parametrize("scheme", kernel.SCHEMES)
def test_row_mass(params, scheme):
    cap = kernel.default_cap(params)
    b = kernel.assemble_blocks(params, kernel.uniform_grid(cap, 400, scheme))
    assert np.all(b.Q >= 0) and np.all(b.kill >= 0) and np.all(b.overflow >= 0)
    assert np.max(np.abs(b.row_totals - 1.0)) < 1e-12


def test_laplace_row_totals_cap_40():
    b = kernel.assemble_blocks(LAPLACE, kernel.uniform_grid(40.0, 400))
    assert np.max(np.abs(b.row_totals - 1.0)) < 1e-10


def test_entries_approximate_nystrom_values():
    b = kernel.assemble_blocks(GAUSS, kernel.uniform_grid(16.0, 800))
    x, w = b.grid.nodes, b.grid.weights
    nys = Gaussian().pdf(x[None, :] - 0.5 * x[:, None]) * w[None, :]
    assert np.max(np.abs(b.Q - nys)) < w[0] ** 3


def test_kill_mass_at_zero():
    # the first node sits near 0, where kill = cdf(-a x) -> cdf(0) = 1/2
    b = kernel.assemble_blocks(GAUSS, kernel.uniform_grid(16.0, 400))
    x0 = b.grid.nodes[0]
    assert b.kill[0] == Gaussian().cdf(-0.5 * x0)
    assert abs(b.kill[0] - 0.5) <= 0.5 * x0 * Gaussian().pdf(0.0)


def test_uniform_overflow_vanishes():
    b = kernel.assemble_blocks(UNIFORM, kernel.uniform_grid(2.0, 400))
    assert np.all(b.overflow == 0)
    assert np.max(np.abs(b.row_totals - 1)) < 1e-12


def test_mass_defect_detected():
    class Leaky(Gaussian):
        def cdf(self, x):
            return 0.999 * super().cdf(x)

    with pytest.raises(MassDefect):
        kernel.assemble_blocks(ChainParams(0.5, Leaky()), kernel.uniform_grid(16.0, 64))


def test_reflect_policy_brackets_kill_policy():
    cap = 4.0  # deliberately short, so the two policies differ
    g = kernel.uniform_grid(cap, 200)
    lo = perron_root(kernel.assemble_blocks(GAUSS, g, "kill").Q)
    hi = perron_root(kernel.assemble_blocks(GAUSS, g, "reflect").Q)
    assert lo < hi
    ref = perron_root(kernel.assemble_blocks(GAUSS, kernel.uniform_grid(16.0, 800)).Q)
    assert lo - 1e-4 < ref < hi + 1e-4


def test_policies_agree_as_cap_grows():
    gaps = []
    for cap in (3.0, 6.0, 12.0):
        g = kernel.uniform_grid(cap, int(50 * cap))
        gaps.append(perron_root(kernel.assemble_blocks(GAUSS, g, "reflect").Q)
                    - perron_root(kernel.assemble_blocks(GAUSS, g, "kill").Q))
    assert gaps[0] > gaps[1] > gaps[2] >= -1e-12
    assert gaps[2] < 1e-8


def _richardson_order(params, scheme, ns):
    lam = [-math.log(perron_root(kernel.assemble_blocks(params, kernel.uniform_grid(16.0, n, scheme)).Q)) for n in ns]
    return math.log2(abs(lam[0] - lam[1]) / abs(lam[1] - lam[2]))


def test_midpoint_is_second_order():
    assert _richardson_order(GAUSS, "midpoint", (100, 200, 400)) == pytest.approx(2.0, abs=0.2)


def test_gauss_legendre_doubles_order():
    p_mid = _richardson_order(GAUSS, "midpoint", (100, 200, 400))
    p_gl = _richardson_order(GAUSS, "gauss_legendre_composite", (100, 200, 400))
    assert p_gl == pytest.approx(2 * p_mid, abs=0.5)


def test_default_cap():
    cap = kernel.default_cap(GAUSS)
    assert Gaussian().sf(0.5 * cap) < 1e-10 and Gaussian().sf(0.25 * cap) >= 1e-10
    assert kernel.default_cap(UNIFORM) == 2.0
    with pytest.raises(Diverges):
        kernel.default_cap(ChainParams(0.8, TwoSidedPareto(0.25, 1.0, 1.0)))


def test_select_threshold_meets_margin():
    b = kernel.assemble_blocks(GAUSS, kernel.uniform_grid(16.0, 400))
    lam = 0.3678
    r = kernel.select_threshold(b, lam)
    assert math.exp(lam + 0.1) * b.resplit(r).rho_BB < 0.9
    prev = b.grid.edges[np.searchsorted(b.grid.edges, r) - 1]
    if prev > 0:
        assert math.exp(lam + 0.1) * b.resplit(prev).rho_BB >= 0.9


def test_minorization_constant():
    assert kernel.minorization_constant(Uniform(-1, 1), 0.5) == 0.5
    with pytest.raises(NotBounded):
        kernel.minorization_constant(Gaussian(), 0.5)


def test_minorization_lower_bound_holds():
    # mass of the limiting conditional law on A inside [R_* - y0, R_* - a y0]
    # is at least kappa * nu[R_* - y0, R_*) * |A|
    y0 = 0.5
    kappa = kernel.minorization_constant(Uniform(-1, 1), y0)
    triple = spectral.spectrum_for(UNIFORM, 400).triple
    top = 1.0 - spectral.nu_cdf(triple, 2.0 - y0)[0]
    lo, hi = 2.0 - y0, 2.0 - 0.5 * y0
    mass = float(np.diff(spectral.nu_cdf(triple, [lo, hi]))[0])
    assert mass >= kappa * top * (hi - lo)


def test_lambda_weight_at_zero_is_one():
    b = kernel.assemble_blocks(GAUSS, kernel.build_grid(GAUSS, 5.0, 40.0, 800))
    w = kernel.lambda_weight(b, 5.0, 0.0)
    assert w.finite and np.allclose(w.values, 1.0, atol=1e-9)


def test_lambda_weight_properties():
    lam_t = 0.3678 + 0.05
    vals = []
    for cap, n in ((40.0, 800), (80.0, 1600)):
        b = kernel.assemble_blocks(GAUSS, kernel.build_grid(GAUSS, 5.0, cap, n))
        w = kernel.lambda_weight(b, 5.0, lam_t)
        assert w.finite and np.all(w.values >= math.exp(lam_t) - 1e-12)
        vals.append(np.interp([6.0, 10.0, 20.0], w.nodes, w.values))
        rep = kernel.quasicompact_diagnostic(b, w)
        # Lambda = z (P(X_1 <= M) + Q Lambda) makes the ratio e^-lt - P(X_1 <= M) / Lambda,
        # so the margin closes at the top nodes and is zero up to rounding
        assert rep.holds and rep.margin > -1e-8
    assert np.max(np.abs(vals[1] / vals[0] - 1)) < 0.01


def test_lambda_weight_diverges():
    b = kernel.assemble_blocks(GAUSS, kernel.build_grid(GAUSS, 0.5, 16.0, 320))
    with pytest.raises(Diverges):
        kernel.lambda_weight(b, 0.5, 5.0)
    assert not kernel.lambda_weight(b, 0.5, 5.0, strict=False).finite


def test_quasicompact_trivial_at_zero():
    b = kernel.assemble_blocks(GAUSS, kernel.build_grid(GAUSS, 5.0, 40.0, 400))
    rep = kernel.quasicompact_diagnostic(b, kernel.lambda_weight(b, 5.0, 0.0))
    assert rep.holds and rep.sup_ratio <= 1.0 + 1e-12


def test_quasicompact_flags_truncation():
    # mass killed at a low cap, charged at the top weight, breaks the bound;
    # the report blames the cap, and a generous cap restores the bound
    b = kernel.assemble_blocks(GAUSS, kernel.build_grid(GAUSS, 0.5, 2.5, 100))
    rep = kernel.quasicompact_diagnostic(b, kernel.lambda_weight(b, 0.5, 0.4))
    assert rep.max_overflow > 1e-3
    assert not rep.holds and rep.cause == "truncation"
    b = kernel.assemble_blocks(GAUSS, kernel.build_grid(GAUSS, 0.5, 16.0, 640))
    assert kernel.quasicompact_diagnostic(b, kernel.lambda_weight(b, 0.5, 0.4)).holds


def test_lambda_weight_requires_boundary():
    b = kernel.assemble_blocks(GAUSS, kernel.build_grid(GAUSS, 5.0, 40.0, 400))
    with pytest.raises(ConfigError):
        kernel.lambda_weight(b, 5.01, 0.1)


def test_blocks_round_trip(tmp_path):
    b = kernel.assemble_blocks(LAPLACE, kernel.build_grid(LAPLACE, 4.0, 32.0, 64, "gauss_legendre_composite"))
    path = tmp_path / "k.npz"
    kernel.save_blocks(b, path, {"seed": 3})
    c, header = kernel.load_blocks(path)
    assert header["seed"] == 3 and header["policy"] == "kill"
    assert np.array_equal(b.Q, c.Q) and c.split == b.split and c.params == b.params
    kernel.save_blocks(b, tmp_path / "k2.npz", {"seed": 3})
    assert path.read_bytes() == (tmp_path / "k2.npz").read_bytes()
