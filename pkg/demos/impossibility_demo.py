"""Why no estimator of the finite-sample CDF works uniformly.

The limit CDF F_{inf,gamma}(t) moves as gamma ranges over a bounded set, yet
any parameter in the rho/sqrt(n) ball around a restricted-model point is
statistically indistinguishable from it.  A consistent plug-in estimate
therefore has to miss somewhere in the ball: its error probability stays at
one at the worst local parameter while vanishing at the center.
"""

import numpy as np

from modelavg.cdf_estimation import (
    choose_radius_and_delta,
    non_uniformity_experiment,
    oscillation,
)
from modelavg.design import LimitDesign, exact_gram_design

lim = LimitDesign.from_q(np.eye(2), 1)
t = np.array([0.0, 1.0])

print("oscillation of the limit CDF at t = (0, 1) over gamma in [-5, 5]:")
grid = np.linspace(-5.0, 5.0, 11)
half, (g_lo, g_hi) = oscillation(lim, 1.0, 1.0, t, grid)
print(f"  half-oscillation = {half:.4f}"
      f"  (extremes at gamma = {g_lo[0]:+.1f} and {g_hi[0]:+.1f})")

rho0, delta0, _ = choose_radius_and_delta(lim, 1.0, 1.0, t)
print(f"\nharness choice: rho0 = {rho0:g}, delta0 = {delta0:.4f}")


def rule(n):
    return exact_gram_design(n, np.eye(2), k1=1, orth_seed=3)


print("\nerror probabilities of the selector-based plug-in CDF estimate,")
print("P(|F_check - F_true| > delta0), over the rho0/sqrt(n) ball:")
tab = non_uniformity_experiment(rule, np.array([0.0, 0.0]), 1.0, 1.0,
                                rho0, delta0, t, [50, 200, 800], 1000, seed=5)
rows = np.array(tab.rows)
n_col = tab.columns.index("n")
th_col = tab.columns.index("theta2")
p_col = tab.columns.index("error_prob")
for n in (50, 200, 800):
    sub = rows[rows[:, n_col] == n]
    center = float(sub[sub[:, th_col] == 0.0][0, p_col])
    print(f"  n = {n:4d}: worst over ball = {sub[:, p_col].max():.3f},"
          f"  at the center = {center:.3f}")
print("\npointwise consistency at the center, persistent failure nearby.")
