import math

import numpy as np
import pytest

from modelavg.convergence import (
    DIVERGING,
    FINITE_GAMMA,
    LadderSpec,
    ParameterPath,
    UnsupportedPathError,
    consistency_sweep,
    gamma_degeneration,
    l1_ladder,
    regime_of,
)
from modelavg.design import LimitDesign, exact_gram_design

Q = np.eye(2)


def rule(n):
    return exact_gram_design(n, Q, 1, orth_seed=3)


def test_parameter_path_evaluation():
    fixed = ParameterPath.fixed([1.0, 0.5])
    assert np.allclose(fixed.at(100), [1.0, 0.5])
    local = ParameterPath.local([1.0, 0.0], [0.0, 2.0])
    assert np.allclose(local.at(100), [1.0, 0.2])
    custom = ParameterPath.custom(lambda n: np.array([1.0, 1.0 / n]))
    assert np.allclose(custom.at(10), [1.0, 0.1])


def test_regime_classification():
    assert regime_of(ParameterPath.fixed([1.0, 0.0]), 1).kind == FINITE_GAMMA
    assert regime_of(ParameterPath.fixed([1.0, 0.5]), 1).kind == DIVERGING
    loc = regime_of(ParameterPath.local([1.0, 0.0], [0.0, 2.0]), 1)
    assert loc.kind == FINITE_GAMMA
    assert np.allclose(loc.gamma, [2.0])
    # custom paths are probed
    div = regime_of(ParameterPath.custom(
        lambda n: np.array([0.0, n ** -0.1])), 1)
    assert div.kind == DIVERGING
    fin = regime_of(ParameterPath.custom(
        lambda n: np.array([0.0, 3.0 / math.sqrt(n)])), 1)
    assert fin.kind == FINITE_GAMMA
    with pytest.raises(UnsupportedPathError):
        regime_of(ParameterPath.custom(
            lambda n: np.array([0.0, math.sin(math.log(n)) / math.sqrt(n)])),
            1)


def test_ladder_spec_validation():
    with pytest.raises(ValueError):
        LadderSpec(n_ladder=(20, 20), path=ParameterPath.fixed([0.0, 0.0]),
                   design_rule=rule)
    with pytest.raises(ValueError):
        LadderSpec(n_ladder=(80, 20), path=ParameterPath.fixed([0.0, 0.0]),
                   design_rule=rule)


def test_l1_ladder_fixed_restricted_regime():
    spec = LadderSpec(n_ladder=(20, 80), path=ParameterPath.fixed([0.5, 0.0]),
                      design_rule=rule)
    tab = l1_ladder(spec, 1.0, 1.0)
    assert tab.columns == ("n", "l1")
    vals = np.array(tab.column("l1"))
    # the exact-Gram design reproduces the limit law at every n
    assert np.all(vals < 1e-10)


def test_l1_ladder_diverging_regime_decreases():
    spec = LadderSpec(n_ladder=(20, 80, 320),
                      path=ParameterPath.fixed([0.5, 0.5]),
                      design_rule=rule)
    tab = l1_ladder(spec, 1.0, 1.0)
    vals = np.array(tab.column("l1"))
    assert vals[-1] < vals[0]
    assert vals[-1] < 0.1


def test_gamma_degeneration_monotone():
    lim = LimitDesign.from_q(Q, 1)
    tab = gamma_degeneration(lim, 1.0, 1.0, [0.0, 2.0, 10.0])
    vals = np.array(tab.column("l1"))
    assert np.all(np.diff(vals) < 0)
    assert vals[-1] < 0.01


def test_consistency_sweep_table():
    m = 10.0 * math.sqrt(np.trace(np.linalg.inv(Q)))
    tab = consistency_sweep(rule, 1.0, 1.0, [m],
                            [np.array([0.0, 0.0]), np.array([1.0, 0.5])],
                            [50, 200], 500, seed=9)
    rows = np.array([[float(v) for v in r] for r in tab.rows])
    tails = rows[:, tab.columns.index("tail_prob")]
    bound_ok = rows[:, tab.columns.index("bound_ok")]
    assert np.all(tails < 0.05)
    assert np.all(bound_ok == 1.0)
    # deterministic
    tab2 = consistency_sweep(rule, 1.0, 1.0, [m],
                             [np.array([0.0, 0.0]), np.array([1.0, 0.5])],
                             [50, 200], 500, seed=9)
    assert tab.rows == tab2.rows
