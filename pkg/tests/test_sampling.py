import numpy as np
import pytest
from scipy.stats import norm

from modelavg.design import LimitDesign, exact_gram_design
from modelavg.estimator import AveragingConfig
from modelavg.laws import AT_INFINITY, AsymptoticLaw, FiniteSampleLaw
from modelavg.sampling import (
    empirical_cdf,
    ks_distance,
    ks_per_coordinate,
    sample_asymptotic,
    sample_chi_rep,
    sample_data_level,
    sample_root_rep,
)

Q = np.array([[1.0, 0.2], [0.2, 1.5]])


def setting(n=20, alpha=1.0, sigma=1.0, seed=3):
    design = exact_gram_design(n, Q, 1, orth_seed=seed)
    return design, AveragingConfig(alpha=alpha, sigma=sigma)


def test_samplers_are_deterministic():
    design, cfg = setting()
    beta = np.array([0.5, 0.1])
    for fn in (sample_data_level, sample_root_rep):
        b1 = fn(design, beta, cfg, 500, seed=42)
        b2 = fn(design, beta, cfg, 500, seed=42)
        b3 = fn(design, beta, cfg, 500, seed=43)
        assert np.array_equal(b1.draws, b2.draws)
        assert not np.array_equal(b1.draws, b3.draws)
    c1 = sample_chi_rep(design, cfg, 500, seed=42)
    c2 = sample_chi_rep(design, cfg, 500, seed=42)
    assert np.array_equal(c1.draws, c2.draws)


def test_chunking_does_not_depend_on_total_size():
    design, cfg = setting()
    beta = np.array([0.0, 0.0])
    big = sample_data_level(design, beta, cfg, 3000, seed=1)
    small = sample_data_level(design, beta, cfg, 1000, seed=1)
    assert np.array_equal(big.draws[:1000], small.draws)


def test_streams_are_independent():
    design, cfg = setting()
    beta = np.array([0.0, 0.0])
    a = sample_data_level(design, beta, cfg, 200, seed=5)
    b = sample_root_rep(design, beta, cfg, 200, seed=5)
    assert not np.allclose(a.draws, b.draws)
    assert a.representation_tag == "DATA_LEVEL"
    assert b.representation_tag == "ROOT_REP"


def test_chi_rep_rejects_nonzero_beta2():
    design, cfg = setting()
    with pytest.raises(ValueError):
        sample_chi_rep(design, cfg, 100, seed=0, beta2=np.array([0.5]))
    # explicit zero is fine
    batch = sample_chi_rep(design, cfg, 100, seed=0, beta2=np.array([0.0]))
    assert batch.draws.shape == (100, 2)


def test_data_level_extra_records_bound():
    design, cfg = setting()
    batch = sample_data_level(design, np.array([1.0, 0.3]), cfg, 2000, seed=9)
    assert batch.extra["max_weighted_gap"] <= batch.extra["shrink_bound"]


def test_representations_agree_in_distribution():
    design, cfg = setting()
    beta = np.array([0.4, 0.0])
    data = sample_data_level(design, beta, cfg, 20000, seed=11)
    root = sample_root_rep(design, beta, cfg, 20000, seed=12)
    chi = sample_chi_rep(design, cfg, 20000, seed=13)
    assert ks_distance(data, root) <= 0.02
    assert ks_distance(data, chi) <= 0.02
    assert ks_distance(root, chi) <= 0.02


def test_root_rep_matches_law_marginals():
    design, cfg = setting()
    beta = np.array([0.0, 0.2])
    law = FiniteSampleLaw(design, beta, cfg)
    batch = sample_root_rep(design, beta, cfg, 50000, seed=17)
    assert np.all(ks_per_coordinate(batch, law) <= 0.01)


def test_asymptotic_sampler_finite_and_infinite_gamma():
    lim = LimitDesign.from_q(Q, 1)
    fin = sample_asymptotic(lim, np.array([1.0]), 1.0, 1.0, 50000, seed=2)
    law = AsymptoticLaw(lim, np.array([1.0]), 1.0, 1.0)
    assert np.all(ks_per_coordinate(fin, law) <= 0.01)
    inf = sample_asymptotic(lim, AT_INFINITY, 1.0, 1.0, 50000, seed=2)
    cov = np.linalg.inv(Q)
    ks = ks_per_coordinate(
        inf, lambda j, x: norm.cdf(x / np.sqrt(cov[j, j])))
    assert np.all(ks <= 0.01)


def test_empirical_cdf_and_validation():
    design, cfg = setting()
    batch = sample_root_rep(design, np.zeros(2), cfg, 1000, seed=0)
    assert empirical_cdf(batch, np.array([1e9, 1e9])) == 1.0
    assert empirical_cdf(batch, np.array([-1e9, 0.0])) == 0.0
    mid = empirical_cdf(batch, np.array([0.0, 0.0]))
    assert 0.0 < mid < 1.0
    with pytest.raises(ValueError):
        sample_root_rep(design, np.zeros(2), cfg, 0, seed=0)


def test_ks_one_sample_calibration():
    # KS of N(0,1) draws against the true CDF sits near the n^{-1/2} scale
    rng = np.random.Generator(np.random.Philox(key=np.array([9, 9],
                                                            dtype=np.uint64)))
    draws = rng.standard_normal((40000, 1))

    from modelavg.sampling import SampleBatch
    batch = SampleBatch(draws=draws, seed=9, representation_tag="ROOT_REP")
    ks = ks_per_coordinate(batch, lambda j, x: norm.cdf(x))
    assert ks[0] <= 0.012
