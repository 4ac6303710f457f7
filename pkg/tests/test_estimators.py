import math

import numpy as np
import pytest

from ar1persist import estimators, spectral
from ar1persist.chain import ChainParams, SurvivalCurve, survival_curve_mc
from ar1persist.errors import ConfigError, DomainError, EmptyWindow, Extinction
from ar1persist.innovations import Gaussian, TwoSidedPareto, Uniform

GAUSS = ChainParams(0.5, Gaussian())
UNIFORM = ChainParams(0.5, Uniform(-1, 1))


def _curve(p, N):
    return SurvivalCurve(1.0, np.arange(len(p)), np.asarray(p), N, 0)


def test_slope_recovers_exact_geometric_decay():
    N = 10**15
    n = np.arange(31)
    survivors = np.round(N * 0.8 * np.exp(-0.3 * n)).astype(np.int64)
    survivors[0] = N
    fit = estimators.lambda_from_slope(_curve(survivors, N), (10, 30))
    assert fit.lambda_hat == pytest.approx(0.3, abs=1e-8)
    assert fit.intercept == pytest.approx(-math.log(0.8), abs=1e-6)
    lam, se = fit
    assert se > 0 and lam == fit.lambda_hat


def test_slope_window_checks():
    survivors = np.array([1000, 500, 250, 120, 60, 30, 10, 0, 0, 0])
    with pytest.raises(ConfigError):
        estimators.lambda_from_slope(_curve(survivors, 1000), (1, 4))
    with pytest.raises(ConfigError):
        estimators.lambda_from_slope(_curve(survivors, 1000), (5, 12))
    with pytest.raises(EmptyWindow):
        estimators.lambda_from_slope(_curve(survivors, 1000), (3, 9))


def test_slope_ignores_isolated_zero_death_step():
    # a step in which nobody dies is routine once few paths remain
    N = 10**6
    survivors = np.round(N * 0.8 ** np.arange(41)).astype(np.int64)
    survivors[-1] = survivors[-2]
    fit = estimators.lambda_from_slope(_curve(survivors, N), (15, 40))
    assert fit.lambda_hat == pytest.approx(-math.log(0.8), abs=3 * fit.stderr)


def test_slope_stderr_is_calibrated():
    params = ChainParams(0.5, Gaussian())
    lam = spectral.spectrum_for(params, 800).triple.lambda_a
    z = []
    for seed in range(60):
        fit = estimators.lambda_from_slope(survival_curve_mc(params, 1.0, 22, 10**5, seed=seed), (8, 22))
        z.append((fit.lambda_hat - lam) / fit.stderr)
    assert 0.7 < np.std(z) < 1.3 and abs(np.mean(z)) < 0.5


def test_slope_flat_curve():
    fit = estimators.lambda_from_slope(_curve(np.full(20, 500), 500), (5, 15))
    assert fit.lambda_hat == pytest.approx(0.0, abs=1e-12)


def test_fv_without_kills():
    res = estimators.fleming_viot(ChainParams(0.5, Uniform(0.0, 1.0)), 1000, 50, 10, seed=1)
    assert res.lambda_hat == 0.0
    assert np.all(res.ensemble.kill_events_per_step == 0)


def test_fv_invariants_and_determinism():
    a = estimators.fleming_viot(GAUSS, 2000, 60, 20, seed=5)
    b = estimators.fleming_viot(GAUSS, 2000, 60, 20, seed=5)
    assert a.ensemble.positions.size == 2000 and np.all(a.ensemble.positions > 0)
    assert np.array_equal(a.ensemble.positions, b.ensemble.positions)
    assert a.histogram.sum() == pytest.approx(1.0)
    assert np.all((a.ensemble.survival_fractions > 0) & (a.ensemble.survival_fractions <= 1))


def test_fv_config_checks():
    with pytest.raises(ConfigError):
        estimators.fleming_viot(GAUSS, 10, 60, 20, seed=5)
    with pytest.raises(ConfigError):
        estimators.fleming_viot(GAUSS, 2000, 60, 60, seed=5)


def test_fv_extinction(monkeypatch):
    # the positive part of the stationary law is out of reach for such a drift,
    # so start the particles just above zero, where each dies w.p. 1 - 1e-9
    harsh = ChainParams(0.5, Gaussian(-6.0, 1.0))
    monkeypatch.setattr(estimators, "_positive_stationary", lambda params, size, rng: np.full(size, 1e-3))
    with pytest.raises(Extinction) as info:
        estimators.fleming_viot(harsh, 1000, 5, 0, seed=2)
    assert info.value.step == 1 and info.value.exit_code == 3


def test_fv_matches_qsd_uniform():
    triple = spectral.spectrum_for(UNIFORM, 400).triple
    res = estimators.fleming_viot(UNIFORM, 20_000, 200, 50, seed=11, bins=np.linspace(0.0, 2.0, 41))
    fv_cdf = np.cumsum(res.histogram)
    nu_cdf = spectral.nu_cdf(triple, res.edges[1:])
    assert np.max(np.abs(fv_cdf - nu_cdf)) < 0.05
    assert res.lambda_hat == pytest.approx(triple.lambda_a, rel=0.05)


def test_fv_trace(tmp_path):
    res = estimators.fleming_viot(GAUSS, 1000, 10, 2, seed=3)
    res.trace_csv(tmp_path / "fv.csv", ["seed: 3"])
    lines = (tmp_path / "fv.csv").read_text().splitlines()
    assert lines[1] == "step,kills,survival_fraction" and len(lines) == 12


def test_probe_small_scale(tmp_path):
    params = ChainParams(0.8, TwoSidedPareto(1.0, 1.0, 1.0))
    rep = estimators.heavy_tail_summability_probe(params, M=30.0, n_max=30, n_paths=10**5, seed=4, window=(5, 25))
    assert rep.target == pytest.approx(-math.log(0.8))
    assert np.all(np.diff(rep.partial_sums) >= 0)
    assert np.all(rep.partial_sums_ci[0] <= rep.partial_sums) and np.all(rep.partial_sums <= rep.partial_sums_ci[1])
    s = rep.summary()
    assert s["ratio"] == pytest.approx(rep.slope.lambda_hat / rep.target)
    assert "not certified" in s["note"]
    assert s["lower_bound_holds"]
    rep.trace_csv(tmp_path / "p.csv")
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "n,p_hat,weighted_partial_sum"


def test_probe_needs_regular_variation():
    with pytest.raises(DomainError):
        estimators.heavy_tail_summability_probe(GAUSS, 5.0, 30, 1000, seed=1)


def test_fv_refuses_unreachable_start():
    with pytest.raises(DomainError, match="too little mass"):
        estimators.fleming_viot(ChainParams(0.5, Gaussian(-6.0, 1.0)), 1000, 5, 0, seed=2)
