"""Exact Monte Carlo samplers and empirical-CDF utilities.

Three equivalent routes to the law of sqrt(n)*(beta_tilde - beta): full
data-level simulation, the coefficient-matrix representation on independent
Gaussians, and (for beta2 = 0) the chi-square / unit-sphere representation.
All randomness comes from a counter-based generator keyed by (seed, stream),
with fixed internal chunking, so batches are pure functions of their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .design import LimitDesign, PartitionedDesign
from .estimator import AveragingConfig, batch_estimates, shrink_bound

_STREAMS = {"DATA_LEVEL": 1, "ROOT_REP": 2, "CHI_REP": 3, "ASYMPTOTIC": 4}
_CHUNK = 8192
_REP_CHECK = 1000
_REP_TOL = 1e-10


@dataclass(frozen=True)
class SampleBatch:
    """An (N, k) matrix of draws plus the seed and representation tag."""

    draws: np.ndarray
    seed: int
    representation_tag: str
    extra: dict = field(default_factory=dict)

    @property
    def n_draws(self) -> int:
        return self.draws.shape[0]


def _rng(seed: int, tag: str) -> np.random.Generator:
    key = np.array([np.uint64(seed), np.uint64(_STREAMS[tag])], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _check_n(n_draws: int) -> None:
    if n_draws < 1:
        raise ValueError(f"need N >= 1 draws, got {n_draws}")


def sample_data_level(design: PartitionedDesign, beta, cfg: AveragingConfig,
                      n_draws: int, seed: int) -> SampleBatch:
    """Simulate Y = X beta + u and run the estimator on every draw.

    The batch carries ``extra['max_weighted_gap']``, the largest observed
    sqrt(n)*||beta_tilde - beta_u||, for checking the deterministic shrink
    bound.
    """
    _check_n(n_draws)
    beta = np.asarray(beta, dtype=float)
    rng = _rng(seed, "DATA_LEVEL")
    mean = design.x @ beta
    rn = math.sqrt(design.n)
    draws = np.empty((n_draws, design.k))
    max_gap = 0.0
    for start in range(0, n_draws, _CHUNK):
        stop = min(start + _CHUNK, n_draws)
        u = cfg.sigma * rng.standard_normal((stop - start, design.n))
        out = batch_estimates(design, mean + u, cfg)
        draws[start:stop] = rn * (out["beta_tilde"] - beta)
        gap = rn * np.linalg.norm(out["beta_tilde"] - out["beta_u"], axis=1)
        max_gap = max(max_gap, float(gap.max()))
    return SampleBatch(draws=draws, seed=seed, representation_tag="DATA_LEVEL",
                       extra={"max_weighted_gap": max_gap,
                              "shrink_bound": shrink_bound(design, cfg)})


def sample_root_rep(design: PartitionedDesign, beta, cfg: AveragingConfig,
                    n_draws: int, seed: int) -> SampleBatch:
    """Sample through the coefficient-matrix representation.

    An algebraically equivalent rewriting is evaluated on the first draws as
    an internal cross-check; disagreement beyond 1e-10 is a bug.
    """
    _check_n(n_draws)
    beta = np.asarray(beta, dtype=float)
    beta2 = beta[design.k1 :]
    rng = _rng(seed, "ROOT_REP")
    z1 = cfg.sigma * rng.standard_normal((n_draws, design.k1))
    z2 = cfg.sigma * rng.standard_normal((n_draws, design.k2))
    rn = math.sqrt(design.n)
    shift = design.b_mat @ (rn * beta2)
    v2 = z2 + design.s2_root @ beta2
    s = expit(cfg.alpha * np.sum(v2 * v2, axis=1) / cfg.sigma**2
              - 2.0 * cfg.alpha * design.k2)
    dz2 = rn * z2 @ design.d_mat.T
    draws = shift + rn * z1 @ design.c_mat.T + s[:, None] * (dz2 - shift)
    m = min(n_draws, _REP_CHECK)
    alt = (rn * z1[:m] @ design.c_mat.T + dz2[:m]
           - (1.0 - s[:m, None]) * (dz2[:m] - shift))
    if not np.allclose(alt, draws[:m], rtol=0.0,
                       atol=_REP_TOL * (1.0 + np.abs(draws[:m]).max())):
        raise RuntimeError("representation cross-check failed")
    return SampleBatch(draws=draws, seed=seed, representation_tag="ROOT_REP")


def sample_chi_rep(design: PartitionedDesign, cfg: AveragingConfig,
                   n_draws: int, seed: int, beta2=None) -> SampleBatch:
    """Sample via chi-square radius and a uniform sphere direction.

    Only valid when beta2 = 0; passing a nonzero beta2 raises.
    """
    _check_n(n_draws)
    if beta2 is not None and np.any(np.asarray(beta2, float) != 0.0):
        raise ValueError("chi-square representation requires beta2 = 0")
    rng = _rng(seed, "CHI_REP")
    z1 = cfg.sigma * rng.standard_normal((n_draws, design.k1))
    chi2 = cfg.sigma**2 * rng.chisquare(design.k2, size=n_draws)
    direc = rng.standard_normal((n_draws, design.k2))
    direc /= np.linalg.norm(direc, axis=1, keepdims=True)
    s = expit(cfg.alpha * chi2 / cfg.sigma**2 - 2.0 * cfg.alpha * design.k2)
    rn = math.sqrt(design.n)
    draws = (rn * z1 @ design.c_mat.T
             + (np.sqrt(chi2) * s)[:, None] * (rn * direc @ design.d_mat.T))
    return SampleBatch(draws=draws, seed=seed, representation_tag="CHI_REP")


def sample_asymptotic(limit: LimitDesign, gamma, sigma: float, alpha: float,
                      n_draws: int, seed: int) -> SampleBatch:
    """Sample the asymptotic law; gamma may be a vector or infinity."""
    _check_n(n_draws)
    rng = _rng(seed, "ASYMPTOTIC")
    if np.isscalar(gamma) and np.isinf(gamma):
        chol = np.linalg.cholesky(np.linalg.inv(limit.q))
        draws = sigma * rng.standard_normal((n_draws, limit.k)) @ chol.T
        return SampleBatch(draws=draws, seed=seed,
                           representation_tag="ASYMPTOTIC")
    gamma = np.asarray(gamma, dtype=float).ravel()
    z1 = sigma * rng.standard_normal((n_draws, limit.k1))
    z2 = sigma * rng.standard_normal((n_draws, limit.k2))
    shift = limit.b_mat @ gamma
    w2 = z2 + limit.schur_root @ gamma
    s = expit(alpha * np.sum(w2 * w2, axis=1) / sigma**2 - 2.0 * alpha * limit.k2)
    draws = shift + z1 @ limit.c_mat.T + s[:, None] * (z2 @ limit.d_mat.T - shift)
    return SampleBatch(draws=draws, seed=seed, representation_tag="ASYMPTOTIC")


def empirical_cdf(batch: SampleBatch, t) -> float:
    """Joint empirical orthant CDF at t."""
    if batch.n_draws < 1:
        raise ValueError("empty batch")
    t = np.asarray(t, dtype=float)
    return float(np.mean(np.all(batch.draws <= t, axis=1)))


def _ks_one_sample(x: np.ndarray, cdf_vals_sorted: np.ndarray) -> float:
    n = x.size
    grid = np.arange(n, dtype=float)
    d_plus = np.max((grid + 1.0) / n - cdf_vals_sorted)
    d_minus = np.max(cdf_vals_sorted - grid / n)
    return float(max(d_plus, d_minus))


def ks_per_coordinate(batch: SampleBatch, other) -> np.ndarray:
    """One-dimensional KS distances, one per coordinate.

    ``other`` may be another batch (two-sample KS), a law exposing
    ``marginal_cdf(j, x)``, or a callable ``(j, x) -> F``.
    """
    if batch.n_draws < 1:
        raise ValueError("empty batch")
    k = batch.draws.shape[1]
    out = np.empty(k)
    if isinstance(other, SampleBatch):
        from scipy.stats import ks_2samp

        for j in range(k):
            out[j] = ks_2samp(batch.draws[:, j], other.draws[:, j]).statistic
        return out
    fn = other.marginal_cdf if hasattr(other, "marginal_cdf") else other
    for j in range(k):
        xs = np.sort(batch.draws[:, j])
        out[j] = _ks_one_sample(xs, np.asarray(fn(j, xs), float))
    return out


def ks_distance(batch: SampleBatch, other) -> float:
    """The maximum per-coordinate KS distance."""
    return float(np.max(ks_per_coordinate(batch, other)))
