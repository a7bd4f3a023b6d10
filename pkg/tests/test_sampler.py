import math

import numpy as np
import pytest

from bose_ldp import sampler, thermo
from bose_ldp.errors import ParameterError, StateSpaceError
from bose_ldp.model import ModelParams, make_weights
from bose_ldp.sampler import (
    SamplerConfig,
    brute_force_distribution,
    density_stats,
    effective_sample_size,
    estimate_condensate,
    grid_minimize_truncated,
    mcmc_tilted,
    run_chains,
    sample_reference,
    write_samples_csv,
)
from bose_ldp.solvers import pmf_delta_star
from conftest import BETA_UNIT

TILTS = {
    "cmf": ModelParams(d=3, beta=BETA_UNIT, alpha=-0.5, a=0.8),
    "pmf": ModelParams(d=3, beta=BETA_UNIT, alpha=-0.5, mu=1.0, a=0.5),
    "hyl": ModelParams(d=3, beta=BETA_UNIT, alpha=-0.5, mu=1.0, a=0.5, b=0.2),
}


def test_config_validation():
    for bad in [dict(volume=0.0, K=2), dict(volume=math.inf, K=2), dict(volume=1.0, K=0),
                dict(volume=1.0, K=2, chain_length=0), dict(volume=1.0, K=2, thinning=0),
                dict(volume=1.0, K=2, chain_length=10, burn_in=10), dict(volume=1.0, K=2, seed=-1),
                dict(volume=1.0, K=2, cap=0), dict(volume=1.0, K=2, n_chains=0)]:
        with pytest.raises(ParameterError):
            SamplerConfig(**bad)
    cfg = SamplerConfig(volume=1.0, K=2, chain_length=100, burn_in=10, thinning=3)
    assert cfg.n_recorded == 30


# ---------------------------------------------------------------------------
# reference sampler

def test_reference_moments():
    p = ModelParams(d=3, beta=1.0, alpha=-0.2)
    cfg = SamplerConfig(volume=50.0, K=20, chain_length=100_000, seed=11)
    s = sample_reference(p, cfg)
    assert s.shape == (100_000, 20) and s.dtype == np.int64
    lam = cfg.volume * make_weights(p, 20, closed_tail=False).q
    n = s.shape[0]
    z_mean = np.abs(s.mean(axis=0) - lam) / np.sqrt(lam / n)
    z_var = np.abs(s.var(axis=0, ddof=1) - lam) / np.sqrt((lam + 2.0 * lam * lam) / n)
    assert z_mean.max() <= 5.0
    assert z_var.max() <= 5.0


def test_reference_streams_reproducible():
    p = ModelParams(d=3, beta=1.0, alpha=-0.2)
    cfg = SamplerConfig(volume=50.0, K=5, chain_length=1000, seed=3)
    np.testing.assert_array_equal(sample_reference(p, cfg), sample_reference(p, cfg))
    assert not np.array_equal(sample_reference(p, cfg, chain=0), sample_reference(p, cfg, chain=1))


# ---------------------------------------------------------------------------
# Metropolis chains

def _histogram(samples, cap):
    K = samples.shape[1]
    flat = np.ravel_multi_index(samples.T, (cap + 1,) * K)
    return np.bincount(flat, minlength=(cap + 1) ** K).reshape((cap + 1,) * K) / samples.shape[0]


@pytest.mark.parametrize("model", ["cmf", "pmf", "hyl"])
def test_chain_matches_exact_distribution(model):
    p = TILTS[model]
    cfg = SamplerConfig(volume=5.0, K=2, chain_length=1_000_000, burn_in=1000, seed=5, cap=30)
    res = mcmc_tilted(model, p, cfg)
    exact = brute_force_distribution(model, p, 5.0, 2, 30)
    tv = 0.5 * np.abs(_histogram(res.samples, 30) - exact.table).sum()
    assert tv <= 0.02
    assert 0.0 < res.acceptance_rate <= 1.0


def test_zero_tilt_chain_matches_reference():
    p = ModelParams(d=3, beta=1.0, alpha=-0.2)
    cfg = SamplerConfig(volume=50.0, K=6, chain_length=400_000, burn_in=1000, seed=9, n_chains=2)
    chain = density_stats("cmf", p.replace(a=0.0), cfg)
    ref = density_stats("ideal", p, cfg)
    se = math.hypot(chain.std_error[0], ref.std_error[0])
    assert abs(chain.mean[0] - ref.mean[0]) <= 5.0 * se
    exact = float(np.dot(make_weights(p, 6, closed_tail=False).k, make_weights(p, 6, closed_tail=False).q))
    assert abs(ref.mean[0] - exact) <= 5.0 * ref.std_error[0]


def test_detailed_balance_single_mode():
    p = ModelParams(d=3, beta=BETA_UNIT, alpha=-0.5, mu=1.0, a=0.5)
    cap = 10
    cfg = SamplerConfig(volume=5.0, K=1, chain_length=10_000_000, seed=21, cap=cap)
    res = mcmc_tilted("pmf", p, cfg)
    path = np.concatenate([[int(np.floor(5.0 * make_weights(p, 1).q[0]))], res.samples[:, 0]])
    step = np.diff(path)
    up = np.bincount(path[:-1][step == 1], minlength=cap + 1)
    down = np.bincount(path[1:][step == -1], minlength=cap + 1)
    # Up-crossings of each edge i -> i+1 balance down-crossings up to one.
    assert np.all(np.abs(up[:cap] - down[:cap]) <= 1)
    pi = brute_force_distribution("pmf", p, 5.0, 1, cap).table
    flux = 0.5 * np.minimum(pi[:-1], pi[1:])
    T = len(step)
    live = flux > 1e-3
    np.testing.assert_allclose(up[:cap][live] / T, flux[live], rtol=0.03)


def test_concentration_with_volume():
    p = ModelParams(d=3, beta=1.0, alpha=-1.0, mu=0.005, a=1.0)
    stds = []
    for vol in (1e2, 1e3, 1e4):
        cfg = SamplerConfig(volume=vol, K=8, chain_length=300_000, burn_in=20_000, seed=4, thinning=10)
        d = sampler._density(mcmc_tilted("pmf", p, cfg).samples, vol)
        stds.append(float(d.std()))
    assert stds[0] > stds[1] > stds[2]


def test_pmf_chain_mean_at_fixed_point():
    p = ModelParams(d=3, beta=1.0, alpha=-1.0, mu=0.005, a=1.0)
    K = 10
    delta = pmf_delta_star(p, make_weights(p, K, closed_tail=False)).delta_star
    cfg = SamplerConfig(volume=1e4, K=K, chain_length=2_000_000, burn_in=100_000, seed=8, n_chains=2)
    st = density_stats("pmf", p, cfg)
    assert abs(st.mean[0] - delta) <= 5.0 * st.std_error[0]


def test_chains_reproducible_and_thread_independent(monkeypatch):
    p = TILTS["hyl"]
    cfg = SamplerConfig(volume=5.0, K=3, chain_length=20_000, seed=13, n_chains=3, cap=30)
    monkeypatch.setenv("BOSE_LDP_THREADS", "1")
    serial = run_chains("hyl", p, cfg)
    monkeypatch.setenv("BOSE_LDP_THREADS", "3")
    threaded = run_chains("hyl", p, cfg)
    for a, b in zip(serial, threaded):
        np.testing.assert_array_equal(a.samples, b.samples)
        assert a.acceptance_rate == b.acceptance_rate
    assert not np.array_equal(serial[0].samples, serial[1].samples)


def test_burn_in_and_thinning_layout():
    p = TILTS["pmf"]
    full = mcmc_tilted("pmf", p, SamplerConfig(volume=5.0, K=2, chain_length=1000, seed=1, cap=30))
    thin = mcmc_tilted("pmf", p, SamplerConfig(volume=5.0, K=2, chain_length=1000, burn_in=100,
                                                thinning=7, seed=1, cap=30))
    np.testing.assert_array_equal(thin.steps, 100 + 7 * np.arange(1, 129))
    np.testing.assert_array_equal(thin.samples, full.samples[thin.steps - 1])


def test_boundary_rejections_and_init():
    p = TILTS["pmf"]
    cfg = SamplerConfig(volume=5.0, K=2, chain_length=10_000, seed=1, cap=2)
    res = mcmc_tilted("pmf", p, cfg)
    assert res.rejected_boundary > 0
    assert res.samples.max() <= 2
    with pytest.raises(ParameterError):
        mcmc_tilted("pmf", p, cfg, init=[3, 0])
    with pytest.raises(ParameterError):
        mcmc_tilted("bcs", p, cfg)


def test_csv_byte_identical(tmp_path):
    p = TILTS["pmf"]
    cfg = SamplerConfig(volume=5.0, K=3, chain_length=2000, seed=42, cap=30)
    paths = []
    for i, seed in enumerate((42, 42, 43)):
        res = mcmc_tilted("pmf", p, SamplerConfig(volume=5.0, K=3, chain_length=2000, seed=seed, cap=30))
        path = tmp_path / f"run{i}.csv"
        write_samples_csv(path, res.samples, res.steps)
        paths.append(path.read_bytes())
    assert paths[0] == paths[1]
    assert paths[0] != paths[2]
    assert paths[0].startswith(b"step,N_1,N_2,N_3\n1,")
    long_path = tmp_path / "long.csv"
    write_samples_csv(long_path, mcmc_tilted("pmf", p, cfg).samples[:2], fmt="long")
    assert long_path.read_text().splitlines()[:2] == ["step,k,count", "1,1," + long_path.read_text().splitlines()[1].split(",")[2]]
    with pytest.raises(ParameterError):
        write_samples_csv(long_path, np.zeros((1, 1)), fmt="tall")


# ---------------------------------------------------------------------------
# estimators

def test_effective_sample_size():
    rng = np.random.default_rng(0)
    n = 200_000
    assert effective_sample_size(rng.normal(size=n)) == pytest.approx(n, rel=0.05)
    phi = 0.9
    e = rng.normal(size=n)
    x = np.empty(n)
    x[0] = e[0]
    for i in range(1, n):
        x[i] = phi * x[i - 1] + e[i]
    assert effective_sample_size(x) == pytest.approx(n * (1 - phi) / (1 + phi), rel=0.15)
    assert effective_sample_size(np.ones(100)) == 100.0


def test_condensate_estimate_trivial_cutoff():
    p = TILTS["pmf"]
    cfg = SamplerConfig(volume=5.0, K=3, chain_length=5000, seed=2, cap=30)
    (est,) = estimate_condensate("pmf", p, cfg, [3])
    assert est.value == 0.0 and est.std_error == 0.0
    assert estimate_condensate("pmf", p, cfg, []) == []
    for bad in ([2, 1], [0], [4]):
        with pytest.raises(ParameterError):
            estimate_condensate("pmf", p, cfg, bad)


def test_ideal_condensate_estimate_is_reference_tail():
    p = ModelParams(d=3, beta=1.0, alpha=-0.2)
    cfg = SamplerConfig(volume=1e3, K=20, chain_length=50_000, seed=6)
    w = make_weights(p, 20, closed_tail=False)
    ests = estimate_condensate("ideal", p, cfg, [1, 5, 10, 20])
    for e in ests:
        expected = float(np.dot(w.k[e.K_prime:], w.q[e.K_prime:]))
        assert abs(e.value - expected) <= 5.0 * e.std_error + 1e-15
        assert e.tail_bias == pytest.approx(make_weights(p, 20).rho_tail)
    vals = [e.value for e in ests]
    assert vals == sorted(vals, reverse=True)


def test_supercritical_condensate_trend():
    # Excess density beyond rho(alpha) can only sit in the longest sampled
    # cycles; it grows with the cutoff K towards mu/a - rho(alpha).
    p = ModelParams(d=3, beta=BETA_UNIT, alpha=-0.01, mu=3.0, a=1.0)
    means, long_parts = [], []
    for K in (20, 40):
        cfg = SamplerConfig(volume=1e4, K=K, chain_length=2_000_000, burn_in=500_000, seed=2, thinning=10)
        means.append(density_stats("pmf", p, cfg).mean[0])
        long_parts.append(estimate_condensate("pmf", p, cfg, [10])[0].value)
    assert means[0] < means[1] < p.mu / p.a
    assert long_parts[0] < long_parts[1]


# ---------------------------------------------------------------------------
# exhaustive oracles

def test_brute_force_normalised():
    for model, p in TILTS.items():
        exact = brute_force_distribution(model, p, 5.0, 2, 30)
        assert abs(exact.table.sum() - 1.0) <= 1e-12
        assert np.all(exact.table >= 0.0)


def test_brute_force_state_space_limits():
    p = TILTS["pmf"]
    with pytest.raises(StateSpaceError):
        brute_force_distribution("pmf", p, 5.0, 4, 3)
    with pytest.raises(StateSpaceError):
        brute_force_distribution("pmf", p, 5.0, 3, 300)
    with pytest.raises(StateSpaceError):
        grid_minimize_truncated("pmf", p, 4, (0.0, 1.0), 1e-2)
    with pytest.raises(ParameterError):
        grid_minimize_truncated("pmf", p, 2, (1.0, 0.0), 1e-2)


def test_brute_force_pressure_approaches_variational_value():
    p = ModelParams(d=3, beta=BETA_UNIT, alpha=-0.5, mu=0.2, a=1.0)
    w = make_weights(p, 1, closed_tail=False)
    target = thermo.pressure_pmf(p, w) - w.qbar / p.beta
    errs = []
    for vol in (10.0, 100.0, 1000.0):
        exact = brute_force_distribution("pmf", p, vol, 1, int(20 * vol))
        errs.append(abs(exact.pressure_excess - target))
    # Finite-volume corrections are O(1/V).
    assert 8.0 < errs[0] / errs[1] < 12.0
    assert 8.0 < errs[1] / errs[2] < 12.0
    assert errs[2] <= 1e-3
