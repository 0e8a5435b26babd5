"""Three routes to the same distribution.

Draws from the law of sqrt(n)*(beta_tilde - beta) by (i) simulating data and
running the estimator, (ii) the coefficient-matrix representation on raw
Gaussians, and (iii) for beta2 = 0 the chi-square / unit-sphere shortcut,
then compares them by two-sample Kolmogorov-Smirnov distances.  Also checks
the deterministic bound on how far averaging can move the unrestricted fit.
"""

import numpy as np

from modelavg.design import exact_gram_design
from modelavg.estimator import AveragingConfig
from modelavg.sampling import (
    ks_per_coordinate,
    sample_chi_rep,
    sample_data_level,
    sample_root_rep,
)

design = exact_gram_design(20, np.array([[1.0, 0.2], [0.2, 1.5]]), k1=1,
                           orth_seed=3)
cfg = AveragingConfig(alpha=1.0, sigma=1.0)
beta = np.array([0.4, 0.0])
n_draws = 50_000

data = sample_data_level(design, beta, cfg, n_draws, seed=1)
root = sample_root_rep(design, beta, cfg, n_draws, seed=2)
chi = sample_chi_rep(design, cfg, n_draws, seed=3)

print(f"{n_draws} draws per representation, beta = {beta.tolist()}")
for name, a, b in [("data-level vs root", data, root),
                   ("data-level vs chi ", data, chi),
                   ("root       vs chi ", root, chi)]:
    ks = ks_per_coordinate(a, b)
    print(f"  {name}: per-coordinate KS = "
          + ", ".join(f"{v:.4f}" for v in ks)
          + f"   (noise floor ~ {2.0 / np.sqrt(n_draws):.4f})")

print("\ndeterministic shrink bound check on the data-level batch:")
print(f"  max sqrt(n)*||beta_tilde - beta_u|| = "
      f"{data.extra['max_weighted_gap']:.3f}")
print(f"  bound                               = "
      f"{data.extra['shrink_bound']:.3f}")
