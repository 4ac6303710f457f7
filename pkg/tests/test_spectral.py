import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from ar1persist import kernel, oracles, spectral
from ar1persist.chain import ChainParams, survival_curve_mc
from ar1persist.errors import DegenerateKernel, DegenerateModel, NoConvergence, OutOfRange, SeriesDiverges
from ar1persist.innovations import Gaussian, Laplace, TwoSidedPareto, Uniform
from ar1persist.linalg import perron_root, perron_vector

TWO = np.array([[0.4, 0.2], [0.1, 0.5]])
GAUSS = ChainParams(0.5, Gaussian())


def test_two_state():
    t = spectral.leading_eigentriple(TWO, tol=1e-14)
    assert t.rho == pytest.approx(0.6, abs=1e-12)
    assert t.lambda_a == pytest.approx(-math.log(0.6), abs=1e-12)
    assert np.allclose(t.V, [1.0, 1.0], atol=1e-12)
    assert np.allclose(t.nu, [1 / 3, 2 / 3], atol=1e-12)
    assert spectral.harmonic_residual(t, TWO) < 1e-12


def test_scaled_identity():
    t = spectral.leading_eigentriple(0.3 * np.eye(5))
    assert t.rho == pytest.approx(0.3)
    assert np.allclose(t.V, 1.0) and np.allclose(t.nu, 0.2)


def test_zero_matrix_refused():
    with pytest.raises(DegenerateKernel):
        spectral.leading_eigentriple(np.zeros((3, 3)))


def test_stochastic_kernel_refused():
    with pytest.raises(DegenerateModel):
        spectral.spectrum_for(ChainParams(0.5, Uniform(0.0, 1.0)))
    g = kernel.uniform_grid(2.0, 64)
    blocks = kernel.assemble_blocks(ChainParams(0.5, Uniform(0.0, 1.0)), g)
    with pytest.raises(DegenerateKernel):
        spectral.leading_eigentriple(blocks)


def test_no_convergence_reported():
    # two nearly equal dominant eigenvalues and no acceleration
    M = np.array([[0.5, 1e-9], [1e-9, 0.5 - 1e-9]])
    with pytest.raises(NoConvergence) as info:
        perron_vector(M, tol=1e-15, max_iter=20, accel_every=10**9)
    assert info.value.max_iter == 20 and info.value.residual > 0


@settings(max_examples=40, deadline=None)
@given(hnp.arrays(float, (6, 6), elements=st.floats(0.01, 1.0)))
def test_perron_root_matches_eigvals(M):
    assert perron_root(M) == pytest.approx(np.max(np.abs(np.linalg.eigvals(M))), rel=1e-10)


def test_laplace_matches_oracle():
    run = spectral.spectrum_for(ChainParams(0.5, Laplace()), 400)
    assert abs(run.triple.lambda_a - oracles.laplace_lambda_a(0.5)) < 1e-3


def test_laplace_scale_invariance():
    a = spectral.spectrum_for(ChainParams(0.5, Laplace(1.0)), 400, cap=64.0).triple.lambda_a
    b = spectral.spectrum_for(ChainParams(0.5, Laplace(3.0)), 400, cap=192.0).triple.lambda_a
    assert a == pytest.approx(b, abs=1e-10)


@pytest.mark.parametrize("model", [Gaussian(), Laplace(), Uniform(-1, 1), Gaussian(0.5, 1.0)])
def test_triple_invariants(model):
    run = spectral.spectrum_for(ChainParams(0.5, model), 400)
    t = run.triple
    assert 0 < t.rho < 1 and t.lambda_a > 0
    assert np.all(t.V > 0) and np.all(t.nu >= 0)
    assert t.nu.sum() == pytest.approx(1.0, abs=1e-14)
    assert t.nu @ t.V == pytest.approx(1.0, abs=1e-12)
    assert t.residual <= 1e-11
    assert np.all(np.diff(t.V) >= -1e-12 * t.V.max())
    assert spectral.qsd_fixed_point_error(t, run.blocks) <= 2e-11


def test_policies_converge_under_cap_doubling():
    gaps = []
    for cap in (4.0, 8.0, 16.0):
        kill = spectral.spectrum_for(GAUSS, int(50 * cap), cap=cap, policy="kill").triple.lambda_a
        refl = spectral.spectrum_for(GAUSS, int(50 * cap), cap=cap, policy="reflect").triple.lambda_a
        gaps.append(kill - refl)
    assert all(g >= -1e-12 for g in gaps)
    assert gaps[1] <= gaps[0] / 2 and gaps[2] <= max(gaps[1] / 2, 1e-10)


def test_prediction_geometric_and_monotone():
    run = spectral.spectrum_for(GAUSS, 400)
    g = run.blocks.grid
    p = spectral.survival_prediction(run.triple, 1.0, np.arange(5, 9), g)
    assert np.allclose(p[1:] / p[:-1], math.exp(-run.triple.lambda_a), rtol=1e-14)
    xs = np.linspace(0.0, 10.0, 41)
    vals = spectral.survival_prediction(run.triple, xs, 10, g)
    assert np.all(np.diff(vals) >= 0)
    with pytest.raises(OutOfRange):
        spectral.survival_prediction(run.triple, g.cap + 1.0, 10, g)


def test_prediction_against_monte_carlo():
    run = spectral.spectrum_for(GAUSS, 800)
    curve = survival_curve_mc(GAUSS, 1.0, 30, 400_000, seed=31)
    n = np.arange(10, 31)
    pred = spectral.survival_prediction(run.triple, 1.0, n, run.blocks.grid)
    inside = (pred >= curve.ci[0, n]) & (pred <= curve.ci[1, n])
    assert inside.sum() >= 18


def test_harmonic_residual_detects_perturbation():
    run = spectral.spectrum_for(GAUSS, 400)
    t = run.triple
    base = spectral.harmonic_residual(t, run.blocks)
    noisy = spectral.EigenTriple(t.rho, t.V * (1 + 0.01 * np.random.default_rng(0).standard_normal(t.V.size)),
                                 t.nu, t.residual, t.iterations, t.nodes, t.weights)
    assert spectral.harmonic_residual(noisy, run.blocks) >= base + 1e-3


def test_gap_proxy_uniform():
    # subleading / leading eigenvalue for Uniform(-1, 1), a = 0.5 is about 0.31
    t = spectral.spectrum_for(ChainParams(0.5, Uniform(-1, 1)), 400).triple
    ev = np.sort(np.abs(np.linalg.eigvals(spectral.spectrum_for(ChainParams(0.5, Uniform(-1, 1)), 400).blocks.Q)))
    assert t.gap_proxy == pytest.approx(ev[-2] / ev[-1], abs=0.05)


def test_heavy_tail_refused():
    with pytest.raises(SeriesDiverges) as info:
        spectral.spectrum_for(ChainParams(0.8, TwoSidedPareto(1.0, 1.0, 1.0)))
    assert info.value.which == "B"


def test_exports(tmp_path):
    run = spectral.spectrum_for(GAUSS, 64)
    run.triple.to_csv(tmp_path / "e.csv", ["seed: 0"])
    run.triple.to_json(tmp_path / "s.json", {"seed": 0})
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[1] == "node,weight,V,nu" and len(lines) == 66
    import json
    doc = json.loads((tmp_path / "s.json").read_text())
    assert {"rho", "lambda_a", "residual", "iterations", "seed"} <= set(doc)
