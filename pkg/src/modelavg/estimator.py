"""The two-model exponential-weight averaging estimator.

Least squares under the restricted (beta2 = 0) and unrestricted models, the
Mallows-type risk estimates, the logistic weight, and their convex
combination.  The weight is always evaluated through a numerically stable
logistic of ``2*alpha*k2 - alpha*fit_gap/sigma^2``; the risk-difference form
is kept only as a test oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .design import PartitionedDesign


@dataclass(frozen=True)
class AveragingConfig:
    """Tuning parameter alpha and the (known) noise standard deviation."""

    alpha: float
    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class EstimateBundle:
    """All estimator outputs for a single data vector."""

    beta_r: np.ndarray
    beta_u: np.ndarray
    lam: float
    beta_tilde: np.ndarray
    risk_r: float
    risk_u: float
    fit_gap: float


def _check_y(design: PartitionedDesign, y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape != (design.n,):
        raise ValueError(f"Y must have shape ({design.n},), got {y.shape}")
    return y


def restricted_ls(design: PartitionedDesign, y: np.ndarray) -> np.ndarray:
    """Least squares under beta2 = 0; last k2 coordinates exactly zero."""
    y = _check_y(design, y)
    top = np.linalg.solve(design.x1tx1, design.x1.T @ y)
    return np.concatenate([top, np.zeros(design.k2)])


def unrestricted_ls(design: PartitionedDesign, y: np.ndarray) -> np.ndarray:
    """Full-model least squares."""
    y = _check_y(design, y)
    return np.linalg.solve(design.gram, design.x.T @ y)


def v2_coordinates(design: PartitionedDesign, y: np.ndarray) -> np.ndarray:
    """Coordinates of Y in the (I - P_R)X2 basis; ||V2||^2 is the fit gap."""
    resid = y - design.p_r @ y
    return design.s2_inv_root @ (design.x2.T @ resid)


def fit_gap(design: PartitionedDesign, y: np.ndarray) -> float:
    """||X beta_r - X beta_u||^2, computed through the V2 coordinates."""
    v2 = v2_coordinates(design, _check_y(design, y))
    return float(v2 @ v2)


def risk_estimates(design: PartitionedDesign, y: np.ndarray,
                   cfg: AveragingConfig) -> tuple[float, float]:
    """Mallows-type unbiased prediction-risk estimates for both models."""
    y = _check_y(design, y)
    yty = float(y @ y)
    s2 = cfg.sigma**2
    br = restricted_ls(design, y)
    bu = unrestricted_ls(design, y)
    risk_r = yty - float(br @ design.gram @ br) + s2 * (2 * design.k1 - design.n)
    risk_u = yty - float(bu @ design.gram @ bu) + s2 * (2 * design.k - design.n)
    return risk_r, risk_u


def weight(design: PartitionedDesign, y: np.ndarray,
           cfg: AveragingConfig) -> float:
    """The mixing weight on the restricted model, in (0, 1)."""
    gap = fit_gap(design, y)
    return float(expit(2.0 * cfg.alpha * design.k2
                       - cfg.alpha * gap / cfg.sigma**2))


def shrink_bound(design: PartitionedDesign, cfg: AveragingConfig) -> float:
    """Deterministic bound on sqrt(n)*||beta_tilde - beta_u||, valid for all Y."""
    return cfg.sigma * math.sqrt(
        math.exp(4.0 * cfg.alpha * design.k2) / (cfg.alpha * design.lam_min)
    )


def batch_estimates(design: PartitionedDesign, ys: np.ndarray,
                    cfg: AveragingConfig) -> dict:
    """Vectorized estimator over an (N, n) batch of data vectors.

    Returns arrays beta_r, beta_u, beta_tilde of shape (N, k), and lam,
    fit_gap of shape (N,).  This is the single production code path; the
    scalar API wraps it.
    """
    ys = np.asarray(ys, dtype=float)
    if ys.ndim != 2 or ys.shape[1] != design.n:
        raise ValueError(f"batch must have shape (N, {design.n})")
    beta_r1 = np.linalg.solve(design.x1tx1, (ys @ design.x1).T).T
    beta_u = np.linalg.solve(design.gram, (ys @ design.x).T).T
    m2 = design.x2 - design.p_r @ design.x2   # (I - P_R) X2
    v2 = (ys @ m2) @ design.s2_inv_root
    gap = np.sum(v2 * v2, axis=1)
    lam = expit(2.0 * cfg.alpha * design.k2 - cfg.alpha * gap / cfg.sigma**2)
    beta_r = np.hstack([beta_r1, np.zeros((ys.shape[0], design.k2))])
    beta_tilde = lam[:, None] * beta_r + (1.0 - lam[:, None]) * beta_u
    return {"beta_r": beta_r, "beta_u": beta_u, "beta_tilde": beta_tilde,
            "lam": lam, "fit_gap": gap}


def model_average(design: PartitionedDesign, y: np.ndarray,
                  cfg: AveragingConfig) -> EstimateBundle:
    """Run the averaging estimator on one data vector."""
    y = _check_y(design, y)
    out = batch_estimates(design, y[None, :], cfg)
    risk_r, risk_u = risk_estimates(design, y, cfg)
    return EstimateBundle(
        beta_r=out["beta_r"][0], beta_u=out["beta_u"][0],
        lam=float(out["lam"][0]), beta_tilde=out["beta_tilde"][0],
        risk_r=risk_r, risk_u=risk_u, fit_gap=float(out["fit_gap"][0]),
    )
