"""Consistent CDF estimation and its uniform-consistency failure.

Implements the plug-in estimator that switches between the Gaussian limit
density and the gamma = 0 limit density according to a consistent model
selector, the oscillation of the limit CDF over local parameter shifts, and
the moving-parameter experiment exhibiting non-uniformity.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .design import LimitDesign, PartitionedDesign
from .estimator import AveragingConfig, unrestricted_ls
from .laws import AT_INFINITY, AsymptoticLaw, FiniteSampleLaw
from .tables import ResultTable


class ModelChoice(enum.Enum):
    M_R = "M_R"
    M_U = "M_U"


@dataclass(frozen=True)
class ModelSelector:
    """Wald test of beta2 = 0 with critical value c_n = n^exponent.

    The exponent must lie strictly inside (0, 1/2) so the critical value
    diverges slower than sqrt(n), making selection consistent.
    """

    critical_value_exponent: float = 0.25

    def __post_init__(self):
        if not 0.0 < self.critical_value_exponent < 0.5:
            raise ValueError("critical_value_exponent must lie in (0, 1/2)")

    def threshold(self, n: int) -> float:
        return float(n) ** (2.0 * self.critical_value_exponent)


def wald_statistic(design: PartitionedDesign, y, cfg: AveragingConfig) -> float:
    """beta2_hat' S2 beta2_hat / sigma^2 from the unrestricted fit."""
    b2 = unrestricted_ls(design, y)[design.k1 :]
    return float(b2 @ design.s2 @ b2) / cfg.sigma**2


def select_model(design: PartitionedDesign, y, cfg: AveragingConfig,
                 selector: ModelSelector) -> ModelChoice:
    if wald_statistic(design, y, cfg) > selector.threshold(design.n):
        return ModelChoice.M_U
    return ModelChoice.M_R


@dataclass(frozen=True)
class CheckEstimate:
    """The plug-in law chosen by the selector, evaluable as pdf or cdf."""

    selected_model: ModelChoice
    law: AsymptoticLaw

    def pdf(self, t):
        return self.law.pdf(t)

    def cdf(self, t, **kwargs):
        return self.law.cdf(t, **kwargs)


def check_estimator(design: PartitionedDesign, y, cfg: AveragingConfig,
                    selector: ModelSelector) -> CheckEstimate:
    """Estimate the law of sqrt(n)*(beta_tilde - beta) from the data.

    On M_U the estimate is the N(0, sigma^2 (X'X/n)^{-1}) law; on M_R it is
    the gamma = 0 limit-law formula with Q replaced by X'X/n.
    """
    choice = select_model(design, y, cfg, selector)
    limit = LimitDesign.from_q(design.gram / design.n, design.k1)
    gamma = AT_INFINITY if choice is ModelChoice.M_U else np.zeros(design.k2)
    return CheckEstimate(selected_model=choice,
                         law=AsymptoticLaw(limit, gamma, cfg.sigma, cfg.alpha))


def asymptotic_cdf_at(limit: LimitDesign, gamma, sigma: float, alpha: float,
                      t) -> float:
    """Limit CDF at t, by quadrature of the analytic limit density."""
    return AsymptoticLaw(limit, gamma, sigma, alpha).cdf(t)


def oscillation(limit: LimitDesign, sigma: float, alpha: float, t,
                gamma_grid) -> tuple[float, tuple]:
    """Half the range of the limit CDF over a gamma grid, plus the extremes."""
    grid = [np.atleast_1d(np.asarray(gm, float)) for gm in gamma_grid]
    if not grid:
        raise ValueError("gamma_grid must be nonempty")
    if not any(np.all(gm == 0.0) for gm in grid):
        raise ValueError("gamma_grid must include 0")
    vals = np.array([asymptotic_cdf_at(limit, gm, sigma, alpha, t)
                     for gm in grid])
    lo, hi = int(np.argmin(vals)), int(np.argmax(vals))
    return 0.5 * float(vals[hi] - vals[lo]), (grid[lo], grid[hi])


def choose_radius_and_delta(limit: LimitDesign, sigma: float, alpha: float, t,
                            radius_grid=None, osc_threshold: float = 0.05,
                            delta_frac: float = 0.4, n_gamma: int = 21):
    """Harness rule for (rho0, delta0).

    rho0 is the smallest scanned radius whose gamma-oscillation reaches
    ``osc_threshold``; delta0 is ``delta_frac`` times the half-oscillation
    over that radius.  Returns (rho0, delta0, half_oscillation).
    """
    if limit.k2 != 1:
        raise ValueError("the impossibility setting requires k2 = 1")
    if radius_grid is None:
        radius_grid = np.arange(0.5, 10.01, 0.5)
    for rho in radius_grid:
        grid = np.linspace(-rho, rho, n_gamma)
        half, _ = oscillation(limit, sigma, alpha, t, grid)
        if 2.0 * half >= osc_threshold:
            return float(rho), float(delta_frac * half), float(half)
    raise RuntimeError("no radius in the scan grid reached the oscillation "
                       "threshold")


def non_uniformity_experiment(design_rule, beta, sigma: float, alpha: float,
                              rho0: float, delta0: float, t, n_ladder,
                              n_rep: int, seed: int,
                              n_theta: int = 21) -> ResultTable:
    """Error probabilities of the plug-in CDF estimate over shrinking balls.

    For each n and each theta2 on a grid in the rho0/sqrt(n) ball around a
    restricted-model beta, estimates
    P(|F_check_n(t) - F_{n,theta,sigma}(t)| > delta0) by n_rep selection
    replications, with the true CDF from quadrature.  Selection is simulated
    by drawing the unrestricted beta2_hat from its exact Gaussian law, which
    is sufficient for the Wald statistic.
    """
    beta = np.asarray(beta, dtype=float)
    cfg = AveragingConfig(alpha=alpha, sigma=sigma)
    selector = ModelSelector()
    n_ladder = list(n_ladder)
    probe = design_rule(max(n_ladder))
    if probe.k2 != 1:
        raise ValueError("the experiment requires k2 = 1")
    if np.any(beta[probe.k1 :] != 0.0):
        raise ValueError("beta must lie in the restricted model")
    limit = LimitDesign.from_q(probe.gram / probe.n, probe.k1)
    half_osc, _ = oscillation(limit, sigma, alpha, t,
                              np.linspace(-rho0, rho0, n_theta))
    if delta0 >= half_osc:
        raise ValueError(
            f"delta0={delta0:g} must lie below half the oscillation "
            f"({half_osc:g}) over the rho0 ball")
    rows = []
    for ni, n in enumerate(n_ladder):
        design = design_rule(n)
        limit_n = LimitDesign.from_q(design.gram / n, design.k1)
        f_zero = AsymptoticLaw(limit_n, np.zeros(1), sigma, alpha).cdf(t)
        f_inf = AsymptoticLaw(limit_n, AT_INFINITY, sigma, alpha).cdf(t)
        s2 = float(design.s2[0, 0])
        thresh = selector.threshold(n)
        for ti, theta2 in enumerate(np.linspace(-rho0, rho0, n_theta)
                                    / math.sqrt(n)):
            theta = beta.copy()
            theta[-1] = theta2
            f_true = FiniteSampleLaw(design, theta, cfg).cdf(t)
            rng = np.random.Generator(np.random.Philox(
                key=np.array([seed, 1000 * ni + ti], dtype=np.uint64)))
            b2_hat = theta2 + sigma / math.sqrt(s2) * rng.standard_normal(n_rep)
            pick_u = b2_hat * b2_hat * s2 / sigma**2 > thresh
            vals = np.where(pick_u, f_inf, f_zero)
            err = np.abs(vals - f_true) > delta0
            p = float(np.mean(err))
            rows.append((n, float(theta2), delta0, rho0, p,
                         math.sqrt(max(p * (1.0 - p), 0.0) / n_rep)))
    return ResultTable(
        columns=("n", "theta2", "delta0", "rho0", "error_prob", "mc_se"),
        rows=rows,
        meta={"seed": seed, "n_rep": n_rep, "alpha": alpha, "sigma": sigma,
              "t": list(np.asarray(t, float))},
    )
