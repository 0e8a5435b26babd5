import math

import numpy as np
import pytest
from scipy.stats import norm

from modelavg.cdf_estimation import (
    ModelChoice,
    ModelSelector,
    asymptotic_cdf_at,
    check_estimator,
    choose_radius_and_delta,
    non_uniformity_experiment,
    oscillation,
    select_model,
    wald_statistic,
)
from modelavg.design import LimitDesign, exact_gram_design
from modelavg.estimator import AveragingConfig, unrestricted_ls
from modelavg.laws import AT_INFINITY
from modelavg.shrink import ShrinkMap, g


def setting(n=50, seed=1):
    design = exact_gram_design(n, np.eye(2), 1, orth_seed=seed)
    return design, AveragingConfig(alpha=1.0, sigma=1.0)


def test_selector_validation_and_threshold():
    sel = ModelSelector(critical_value_exponent=0.25)
    assert sel.threshold(100) == pytest.approx(10.0)
    with pytest.raises(ValueError):
        ModelSelector(critical_value_exponent=0.5)
    with pytest.raises(ValueError):
        ModelSelector(critical_value_exponent=0.0)


def test_wald_statistic_oracle():
    design, cfg = setting()
    rng = np.random.default_rng(2)
    y = rng.normal(size=design.n)
    b2 = unrestricted_ls(design, y)[design.k1:]
    direct = float(b2 @ design.s2 @ b2) / cfg.sigma**2
    assert wald_statistic(design, y, cfg) == pytest.approx(direct, rel=1e-12)


def test_select_model_on_obvious_data():
    design, cfg = setting()
    sel = ModelSelector()
    y_r = design.x @ np.array([1.0, 0.0])        # noiseless restricted mean
    assert select_model(design, y_r, cfg, sel) is ModelChoice.M_R
    y_u = design.x @ np.array([1.0, 5.0])        # strong beta2 signal
    assert select_model(design, y_u, cfg, sel) is ModelChoice.M_U


def test_check_estimator_switches_law():
    design, cfg = setting()
    sel = ModelSelector()
    est_r = check_estimator(design, design.x @ np.array([1.0, 0.0]), cfg, sel)
    assert est_r.selected_model is ModelChoice.M_R
    assert not est_r.law.is_normal
    est_u = check_estimator(design, design.x @ np.array([1.0, 5.0]), cfg, sel)
    assert est_u.selected_model is ModelChoice.M_U
    assert est_u.law.is_normal
    # both estimates expose density and CDF
    assert est_r.law.pdf(np.zeros(2)) > 0
    assert 0 < est_u.law.cdf(np.zeros(2)) < 1


def test_asymptotic_cdf_closed_form_oracle():
    """k2 = 1, block-diagonal Q: the t2-part inverts through g in closed form."""
    lim = LimitDesign.from_q(np.eye(2), 1)
    sigma, alpha = 1.0, 1.0
    smap = ShrinkMap.from_tuning(alpha, sigma, 1)
    for gamma in (-1.0, 0.0, 2.0):
        for t2 in (-1.0, 0.0, 1.0):
            v = t2 + gamma
            w = math.copysign(g(smap, abs(v)), v)
            oracle = norm.cdf(0.0) * norm.cdf(w - gamma)
            val = asymptotic_cdf_at(lim, np.array([gamma]), sigma, alpha,
                                    np.array([0.0, t2]))
            assert val == pytest.approx(oracle, abs=5e-6)


def test_oscillation_and_step1_inequalities():
    lim = LimitDesign.from_q(np.eye(2), 1)
    grid = np.linspace(-5.0, 5.0, 21)
    half, (g_lo, g_hi) = oscillation(lim, 1.0, 1.0, np.array([0.0, 1.0]), grid)
    assert half > 0.01
    assert abs(g_lo[0]) <= 5.0 and abs(g_hi[0]) <= 5.0
    with pytest.raises(ValueError):
        oscillation(lim, 1.0, 1.0, np.array([0.0, 1.0]), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        oscillation(lim, 1.0, 1.0, np.array([0.0, 1.0]), [])


def test_choose_radius_and_delta():
    lim = LimitDesign.from_q(np.eye(2), 1)
    rho0, delta0, half = choose_radius_and_delta(lim, 1.0, 1.0,
                                                 np.array([0.0, 1.0]))
    assert rho0 > 0
    assert 0 < delta0 < half
    with pytest.raises(ValueError):
        choose_radius_and_delta(LimitDesign.from_q(np.eye(3), 1), 1.0, 1.0,
                                np.array([0.0, 0.0, 1.0]))


def test_non_uniformity_experiment_small():
    def rule(n):
        return exact_gram_design(n, np.eye(2), 1, orth_seed=4)

    tab = non_uniformity_experiment(rule, np.array([0.0, 0.0]), 1.0, 1.0,
                                    rho0=1.0, delta0=0.01,
                                    t=np.array([0.0, 1.0]),
                                    n_ladder=[50], n_rep=200, seed=3,
                                    n_theta=5)
    rows = np.array(tab.rows)
    assert set(tab.columns) == {"n", "theta2", "delta0", "rho0", "error_prob",
                                "mc_se"}
    probs = rows[:, tab.columns.index("error_prob")]
    assert np.all((0.0 <= probs) & (probs <= 1.0))
    # the center theta = beta is on the grid
    assert 0.0 in rows[:, tab.columns.index("theta2")]
    # deterministic given the seed
    tab2 = non_uniformity_experiment(rule, np.array([0.0, 0.0]), 1.0, 1.0,
                                     rho0=1.0, delta0=0.01,
                                     t=np.array([0.0, 1.0]),
                                     n_ladder=[50], n_rep=200, seed=3,
                                     n_theta=5)
    assert tab.rows == tab2.rows


def test_non_uniformity_validates_inputs():
    def rule(n):
        return exact_gram_design(n, np.eye(2), 1, orth_seed=4)

    with pytest.raises(ValueError):
        # beta outside the restricted model
        non_uniformity_experiment(rule, np.array([0.0, 1.0]), 1.0, 1.0,
                                  rho0=1.0, delta0=0.01,
                                  t=np.array([0.0, 1.0]),
                                  n_ladder=[50], n_rep=10, seed=0)
