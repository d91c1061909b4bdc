import math

import numpy as np
import pytest
from scipy import stats

from moskcsk.analysis import FieldConfig, count_distribution
from moskcsk.arrivals import LinkConfig
from moskcsk.channel import ChannelParams, SlotGrid, absorbed_fraction
from moskcsk.modulation import SymbolHistory, bcsk, ook
from moskcsk.sim import (
    Estimate,
    ParticleConfig,
    ParticleResult,
    PppSampleConfig,
    mc_counts,
    mc_error_estimate,
    particle_absorbed_fraction,
    particle_counts,
    poisson_counts,
    poisson_error_estimate,
    sample_ppp,
    stream,
)

P = ChannelParams(D=100.0)


def link(L=0, scheme=None, hist=None):
    return LinkConfig(8.0, SlotGrid(0.2, L), scheme or ook(), SymbolHistory(hist or (1,) * (L + 1)), P)


def test_streams_are_keyed():
    a = stream(7, 1, 0, 3).random(4)
    np.testing.assert_array_equal(a, stream(7, 1, 0, 3).random(4))
    assert not np.allclose(a, stream(7, 1, 0, 4).random(4))
    assert not np.allclose(a, stream(8, 1, 0, 3).random(4))
    assert not np.allclose(a, stream(7, 2, 0, 3).random(4))


def test_config_validation():
    with pytest.raises(ValueError):
        PppSampleConfig(-1.0)
    with pytest.raises(ValueError):
        PppSampleConfig(1e-4, r_min=5.0, R_a=4.0)
    with pytest.raises(ValueError):
        PppSampleConfig(1e-4, realizations=0)
    with pytest.raises(ValueError):
        ParticleConfig(dt=0.0)
    with pytest.raises(ValueError):
        ParticleConfig(dt=0.1, t_end=0.01)
    with pytest.raises(ValueError):
        ParticleConfig(r_start=3.0)


def test_estimate_from_indicators():
    e = Estimate.from_indicators([1, 0, 0, 1])
    assert e.mean == 0.5 and e.n == 4
    assert e.stderr == pytest.approx(0.25)


def test_ppp_sampler_statistics():
    cfg = PppSampleConfig(1e-4, R_a=100.0)
    rng = np.random.default_rng(5)
    n = [sample_ppp(cfg, rng).size for _ in range(2000)]
    assert abs(np.mean(n) - cfg.mean_points) < 4 * math.sqrt(cfg.mean_points / 2000)
    r = np.concatenate([sample_ppp(cfg, rng) for _ in range(50)])
    assert r.min() > 4.0 and r.max() <= 100.0
    # r^3 is uniform on the shell
    u = (r**3 - 64.0) / (1e6 - 64.0)
    assert stats.kstest(u, "uniform").pvalue > 1e-3


def test_mc_counts_against_analytical_pmf():
    lam = 1e-4
    cfg = link()
    fld = FieldConfig(lam, r_max_integration=100.0, auto_extend=False)
    ppp = PppSampleConfig(lam, R_a=100.0, realizations=3000, seed=11)
    counts = mc_counts(cfg, fld, ppp, 1)
    pmf = count_distribution(cfg.intensity(), fld, 400).pmf
    # pooled chi-square goodness of fit
    edges = [0, 2, 4, 6, 8, 10, 13, 16, 20, 25, 35, 401]
    obs = np.array([((counts >= a) & (counts < b)).sum() for a, b in zip(edges, edges[1:])])
    exp = np.array([pmf[a:b].sum() for a, b in zip(edges, edges[1:])]) * counts.size
    chi2 = ((obs - exp) ** 2 / exp).sum()
    assert stats.chi2.sf(chi2, len(obs) - 1) > 1e-3


def test_mc_is_deterministic_and_worker_invariant():
    cfg = link()
    fld = FieldConfig(1e-4, r_max_integration=100.0, auto_extend=False)
    ppp = PppSampleConfig(1e-4, realizations=1500, seed=3)
    a = mc_counts(cfg, fld, ppp, 1)
    b = mc_counts(cfg, fld, ppp, 1, workers=2)
    np.testing.assert_array_equal(a, b)
    c = mc_counts(cfg, fld, PppSampleConfig(1e-4, realizations=1500, seed=4), 1)
    assert not np.array_equal(a, c)


def test_mc_rejects_mismatched_density():
    with pytest.raises(ValueError):
        mc_counts(link(), FieldConfig(2e-4), PppSampleConfig(1e-4), 1)


def test_fixed_mode_adds_desired_link():
    cfg = link(2, bcsk(), (1, 0, 1))
    ppp = PppSampleConfig(1e-12, realizations=2000, seed=1)
    counts = mc_counts(cfg, FieldConfig(1e-12, desired_mode="fixed_at_r_star"), ppp, 1)
    mean = float(cfg.intensity()(8.0))
    assert abs(counts.mean() - mean) < 4 * math.sqrt(mean / counts.size)
    e = mc_error_estimate(cfg, FieldConfig(1e-12, desired_mode="fixed_at_r_star"), ppp, 1)
    assert 0.0 <= e.mean <= 1.0


def test_poisson_counts():
    cfg = link()
    x = poisson_counts(cfg, 1, 200_000, seed=2)
    lam = 50 * absorbed_fraction(0.2, 8.0, P)
    assert abs(x.mean() - lam) < 4 * math.sqrt(lam / x.size)
    np.testing.assert_array_equal(x, poisson_counts(cfg, 1, 200_000, seed=2, workers=2))
    e = poisson_error_estimate(cfg, 1, 200_000, seed=2)
    ref = stats.poisson.cdf(9, lam)
    assert abs(e.mean - ref) < 4 * e.stderr


def test_particle_non_absorbing_and_degradation():
    cfg = ParticleConfig(dt=1e-4, n_molecules=500, t_end=0.01, absorbing=False)
    assert particle_absorbed_fraction(cfg).absorbed_fraction == 0.0
    fast = ParticleConfig(dt=1e-4, n_molecules=4000, t_end=0.05, params=ChannelParams(100.0, 200.0), seed=1)
    slow = ParticleConfig(dt=1e-4, n_molecules=4000, t_end=0.05, seed=1)
    assert particle_absorbed_fraction(fast).absorbed_fraction < particle_absorbed_fraction(slow).absorbed_fraction


def test_particle_short_run_matches_channel():
    cfg = ParticleConfig(dt=1e-4, n_molecules=20_000, t_end=0.05, r_start=6.0, seed=9, crossing=True)
    res = particle_absorbed_fraction(cfg)
    ref = absorbed_fraction(0.05, 6.0, P)
    est = res.absorbed_estimate
    assert abs(est.mean - ref) < 4 * est.stderr + 0.02 * ref
    assert np.all(np.diff(res.cumulative_fraction) >= 0)
    assert res.times[-1] == pytest.approx(0.05)


def test_particle_blocks_deterministic():
    cfg = ParticleConfig(dt=1e-4, n_molecules=20_000, t_end=0.005, r_start=5.0, seed=2)
    a = particle_absorbed_fraction(cfg).step_counts
    b = particle_absorbed_fraction(cfg, workers=2).step_counts
    np.testing.assert_array_equal(a, b)
    c = particle_absorbed_fraction(cfg, rng=np.random.default_rng(0)).step_counts
    assert c.sum() > 0


def test_slot_counts():
    r = ParticleResult(np.arange(10), 0.1, 100)
    np.testing.assert_array_equal(r.slot_counts(0.3), [3, 12, 21, 9])
    assert r.absorbed_fraction == pytest.approx(0.45)


def test_particle_counts_against_poisson_mean():
    cfg = link(1, ook(), (1, 1))
    pcfg = ParticleConfig(dt=1e-3, seed=4, crossing=True)
    counts = particle_counts(cfg, pcfg, 1, trials=64)
    assert counts.shape == (64,)
    mean = float(cfg.intensity()(8.0))
    # coarse step: loose tolerance, the mean must still be in range
    assert abs(counts.mean() - mean) < 0.15 * mean + 4 * math.sqrt(mean / 64)
    np.testing.assert_array_equal(counts, particle_counts(cfg, pcfg, 1, trials=64, workers=2))
    with pytest.raises(ValueError):
        particle_counts(cfg, ParticleConfig(dt=0.03, t_end=0.2), 1, trials=4)
