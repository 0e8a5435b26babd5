"""Verification harnesses for the asymptotic results.

Parameter-path regime classification, L1 ladders between finite-sample and
limit densities, the uniform tail-probability sweep, and the degeneration of
the finite-gamma limit to the Gaussian one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .design import LimitDesign, PartitionedDesign
from .estimator import AveragingConfig, batch_estimates, shrink_bound
from .laws import AT_INFINITY, AsymptoticLaw, FiniteSampleLaw, l1_distance
from .tables import ResultTable

DIVERGING = "DIVERGING"
FINITE_GAMMA = "FINITE_GAMMA"


class UnsupportedPathError(ValueError):
    """Raised for parameter paths whose sqrt(n)*beta2 has no limit."""


@dataclass(frozen=True)
class ParameterPath:
    """beta(n): fixed, local (beta + delta/sqrt(n)), or a custom callable."""

    kind: str                      # "fixed" | "local" | "custom"
    beta: Optional[np.ndarray] = None
    delta: Optional[np.ndarray] = None
    fn: Optional[Callable[[int], np.ndarray]] = None

    @classmethod
    def fixed(cls, beta):
        return cls(kind="fixed", beta=np.asarray(beta, float))

    @classmethod
    def local(cls, beta, delta):
        return cls(kind="local", beta=np.asarray(beta, float),
                   delta=np.asarray(delta, float))

    @classmethod
    def custom(cls, fn):
        return cls(kind="custom", fn=fn)

    def at(self, n: int) -> np.ndarray:
        if self.kind == "fixed":
            return self.beta
        if self.kind == "local":
            return self.beta + self.delta / math.sqrt(n)
        if self.kind == "custom":
            return np.asarray(self.fn(n), float)
        raise ValueError(f"unknown path kind {self.kind!r}")


@dataclass(frozen=True)
class Regime:
    kind: str
    gamma: Optional[np.ndarray] = None


def regime_of(path: ParameterPath, k1: int, n_probe: int = 4096) -> Regime:
    """Classify a path by the limit of sqrt(n) * beta2(n)."""
    if path.kind == "fixed":
        b2 = path.beta[k1:]
        if np.all(b2 == 0.0):
            return Regime(FINITE_GAMMA, np.zeros_like(b2))
        return Regime(DIVERGING)
    if path.kind == "local":
        b2 = path.beta[k1:]
        if np.all(b2 == 0.0):
            return Regime(FINITE_GAMMA, path.delta[k1:].copy())
        return Regime(DIVERGING)
    # custom: probe sqrt(n)*beta2 on a geometric ladder
    probes = [math.sqrt(n) * path.at(n)[k1:]
              for n in (n_probe, 4 * n_probe, 16 * n_probe, 64 * n_probe)]
    norms = np.array([np.linalg.norm(p) for p in probes])
    if np.all(np.diff(norms) > 0) and norms[-1] > 4.0 * norms[0] > 0:
        return Regime(DIVERGING)
    gaps = [np.linalg.norm(probes[i + 1] - probes[i]) for i in range(3)]
    if gaps[0] < 1e-3 and gaps[1] < 1e-4 and gaps[2] < 1e-5:
        return Regime(FINITE_GAMMA, probes[-1])
    raise UnsupportedPathError("sqrt(n)*beta2(n) neither diverges nor settles "
                               "on the probe ladder")


@dataclass(frozen=True)
class LadderSpec:
    n_ladder: tuple
    path: ParameterPath
    design_rule: Callable[[int], PartitionedDesign]

    def __post_init__(self):
        ns = list(self.n_ladder)
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError("n_ladder must be strictly increasing")


def _limit_of(design: PartitionedDesign) -> LimitDesign:
    return LimitDesign.from_q(design.gram / design.n, design.k1)


def l1_ladder(spec: LadderSpec, sigma: float, alpha: float,
              box=None, resolution: int = 301) -> ResultTable:
    """L1 distance between the finite-sample density and its limit, per n."""
    cfg = AveragingConfig(alpha=alpha, sigma=sigma)
    top = spec.design_rule(max(spec.n_ladder))
    if top.k != 2:
        raise ValueError("the quadrature ladder requires k = 2")
    limit = _limit_of(top)
    regime = regime_of(spec.path, top.k1)
    gamma = AT_INFINITY if regime.kind == DIVERGING else regime.gamma
    f_inf = AsymptoticLaw(limit, gamma, sigma, alpha)
    rows = []
    for n in spec.n_ladder:
        design = spec.design_rule(n)
        fn = FiniteSampleLaw(design, spec.path.at(n), cfg)
        rows.append((n, l1_distance(fn, f_inf, box=box, resolution=resolution)))
    return ResultTable(columns=("n", "l1"), rows=rows,
                       meta={"regime": regime.kind, "alpha": alpha,
                             "sigma": sigma})


def consistency_sweep(design_rule, sigma: float, alpha: float, m_grid,
                      beta_grid, n_ladder, n_rep: int, seed: int) -> ResultTable:
    """Empirical tails P(sqrt(n)||beta_tilde - beta|| >= M) over a beta grid.

    Also asserts the deterministic shrink bound on every simulated draw;
    ``bound_ok`` records the per-cell outcome.
    """
    cfg = AveragingConfig(alpha=alpha, sigma=sigma)
    rows = []
    for ni, n in enumerate(n_ladder):
        design = design_rule(n)
        bound = shrink_bound(design, cfg)
        rn = math.sqrt(n)
        for bi, beta in enumerate(beta_grid):
            beta = np.asarray(beta, float)
            rng = np.random.Generator(np.random.Philox(
                key=np.array([seed, 1000 * ni + bi], dtype=np.uint64)))
            u = sigma * rng.standard_normal((n_rep, design.n))
            out = batch_estimates(design, design.x @ beta + u, cfg)
            norms = rn * np.linalg.norm(out["beta_tilde"] - beta, axis=1)
            gaps = rn * np.linalg.norm(out["beta_tilde"] - out["beta_u"],
                                       axis=1)
            ok = bool(np.all(gaps <= bound * (1.0 + 1e-12)))
            for m_val in m_grid:
                rows.append((n, bi, float(np.linalg.norm(beta[design.k1:])),
                             float(m_val), float(np.mean(norms >= m_val)), ok))
    return ResultTable(
        columns=("n", "beta_index", "beta2_norm", "M", "tail_prob", "bound_ok"),
        rows=rows, meta={"seed": seed, "n_rep": n_rep, "alpha": alpha,
                         "sigma": sigma})


def gamma_degeneration(limit: LimitDesign, sigma: float, alpha: float,
                       gamma_ladder, box=None,
                       resolution: int = 301) -> ResultTable:
    """L1 distance between the finite-gamma limit and the Gaussian limit."""
    if limit.k != 2:
        raise ValueError("the quadrature path requires k = 2")
    f_inf = AsymptoticLaw(limit, AT_INFINITY, sigma, alpha)
    rows = []
    for gamma in gamma_ladder:
        gamma = np.atleast_1d(np.asarray(gamma, float))
        law = AsymptoticLaw(limit, gamma, sigma, alpha)
        rows.append((float(np.linalg.norm(gamma)),
                     l1_distance(law, f_inf, box=box, resolution=resolution)))
    return ResultTable(columns=("gamma_norm", "l1"), rows=rows,
                       meta={"alpha": alpha, "sigma": sigma})
