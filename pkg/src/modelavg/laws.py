"""Exact distributions of the scaled, centered averaging estimator.

Both the finite-sample law and its finite-gamma asymptotic limit share one
analytic form: a Gaussian block in the first k1 coordinates conditional on
the last k2, times a radial pushforward factor produced by the shrink map.
The diverging-gamma limit is plain Gaussian.  All densities are computed in
log space; CDFs come from adaptive quadrature (k <= 3) or Monte Carlo.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import integrate
from scipy.special import ndtr
from scipy.stats import multivariate_normal

from . import shrink as sm
from .design import LimitDesign, PartitionedDesign
from .estimator import AveragingConfig

AT_INFINITY = float("inf")

_QUAD_OPTS = dict(epsabs=1e-10, epsrel=1e-9, limit=200)
_NSD = 13.0  # half-width, in noise s.d. units, of envelope boxes


class UnsupportedDimensionError(ValueError):
    """Raised when quadrature is requested beyond its supported dimension."""


class _RadialGaussianCore:
    """Density with t1 | t2 Gaussian and a radial shrink factor in t2.

    Parametrized by (A, B, M, omega): the Gaussian block is
    exp(-||A t1 + B t2||^2 / (2 sigma^2)) and the radial block lives on
    u = M (t2 + omega) with offset c = M omega.
    """

    def __init__(self, a_mat, b_mat, m_mat, omega, sigma, shrink: sm.ShrinkMap):
        self.a_mat = np.atleast_2d(np.asarray(a_mat, float))
        self.b_mat = np.asarray(b_mat, float).reshape(self.a_mat.shape[0], -1)
        self.m_mat = np.atleast_2d(np.asarray(m_mat, float))
        self.omega = np.asarray(omega, float).ravel()
        self.sigma = float(sigma)
        self.shrink = shrink
        self.k1 = self.a_mat.shape[0]
        self.k2 = self.m_mat.shape[0]
        self.k = self.k1 + self.k2
        self.a_inv = np.linalg.inv(self.a_mat)
        self.m_inv = np.linalg.inv(self.m_mat)
        self.ainv_b = self.a_inv @ self.b_mat
        self.c_vec = self.m_mat @ self.omega
        self.log_det = (np.linalg.slogdet(self.a_mat)[1]
                        + np.linalg.slogdet(self.m_mat)[1])
        self.cond_cov = sigma**2 * (self.a_inv @ self.a_inv.T)
        self.cond_sd = np.sqrt(np.diag(self.cond_cov))
        self._marginal_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    # -- density -----------------------------------------------------------

    def _radial_parts(self, t2):
        u = (t2 + self.omega) @ self.m_mat.T
        q = np.linalg.norm(u, axis=-1)
        ratio = np.asarray(sm.g_ratio(self.shrink, q))
        resid = np.expand_dims(ratio, -1) * u - self.c_vec
        return q, resid

    def log_density(self, t):
        t = np.asarray(t, dtype=float)
        t1, t2 = t[..., : self.k1], t[..., self.k1 :]
        w = t1 @ self.a_mat.T + t2 @ self.b_mat.T
        q, resid = self._radial_parts(t2)
        half = 0.5 / self.sigma**2
        return (-0.5 * self.k * math.log(2 * math.pi * self.sigma**2)
                + self.log_det
                - half * np.sum(w * w, axis=-1)
                + np.asarray(sm.log_density_factor(self.shrink, q))
                - half * np.sum(resid * resid, axis=-1))

    def marginal2_log_density(self, t2):
        t2 = np.asarray(t2, dtype=float)
        q, resid = self._radial_parts(t2)
        return (-0.5 * self.k2 * math.log(2 * math.pi * self.sigma**2)
                + np.linalg.slogdet(self.m_mat)[1]
                + np.asarray(sm.log_density_factor(self.shrink, q))
                - 0.5 / self.sigma**2 * np.sum(resid * resid, axis=-1))

    # -- geometry ----------------------------------------------------------

    def t2_box(self):
        r_max = np.linalg.norm(self.c_vec) + _NSD * self.sigma * math.sqrt(self.k2)
        half = r_max * np.linalg.norm(self.m_inv, axis=1)
        return -self.omega - half, -self.omega + half

    def envelope_box(self):
        lo2, hi2 = self.t2_box()
        corners = np.array(list(itertools.product(*zip(lo2, hi2))))
        mu = -(corners @ self.ainv_b.T)
        pad = _NSD * self.cond_sd
        lo1 = mu.min(axis=0) - pad
        hi1 = mu.max(axis=0) + pad
        return np.concatenate([lo1, lo2]), np.concatenate([hi1, hi2])

    # -- CDF ---------------------------------------------------------------

    def _cond_t1_cdf(self, t1, t2):
        mean = -(self.ainv_b @ np.atleast_1d(t2))
        if self.k1 == 1:
            return float(ndtr((t1[0] - mean[0]) / self.cond_sd[0]))
        return float(multivariate_normal(mean=mean, cov=self.cond_cov,
                                         allow_singular=False).cdf(t1))

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        t1, t2 = t[: self.k1], t[self.k1 :]
        lo2, hi2 = self.t2_box()
        if self.k2 == 1:
            up = min(t2[0], hi2[0])
            if up <= lo2[0]:
                return 0.0

            def integrand(s):
                m2 = math.exp(self.marginal2_log_density(np.array([s])))
                return m2 * self._cond_t1_cdf(t1, s)

            val, _ = integrate.quad(integrand, lo2[0], up, **_QUAD_OPTS)
            return min(max(val, 0.0), 1.0)
        if self.k2 == 2 and self.k <= 3:
            up = np.minimum(t2, hi2)
            if np.any(up <= lo2):
                return 0.0

            def integrand2(s1, s0):
                s = np.array([s0, s1])
                m2 = math.exp(self.marginal2_log_density(s))
                return m2 * self._cond_t1_cdf(t1, s)

            val, _ = integrate.dblquad(integrand2, lo2[0], up[0],
                                       lo2[1], up[1],
                                       epsabs=1e-8, epsrel=1e-7)
            return min(max(val, 0.0), 1.0)
        raise UnsupportedDimensionError(
            f"quadrature CDF supports k <= 3 with k2 <= 2, got "
            f"k1={self.k1}, k2={self.k2}"
        )

    # -- marginal CDFs (for KS comparisons) --------------------------------

    def _marginal_grid(self, j):
        if j in self._marginal_cache:
            return self._marginal_cache[j]
        lo2, hi2 = self.t2_box()
        if j >= self.k1:
            i = j - self.k1
            if self.k2 == 1:
                s = np.linspace(lo2[0], hi2[0], 8193)
                dens = np.exp(self.marginal2_log_density(s[:, None]))
            else:
                # integrate out the other t2 coordinate on a tensor grid
                o = 1 - i
                s = np.linspace(lo2[i], hi2[i], 2049)
                so = np.linspace(lo2[o], hi2[o], 2049)
                pts = np.zeros((s.size, so.size, 2))
                pts[..., i] = s[:, None]
                pts[..., o] = so[None, :]
                dens = np.trapezoid(
                    np.exp(self.marginal2_log_density(pts)), so, axis=1)
            cdf = np.concatenate(
                [[0.0], integrate.cumulative_trapezoid(dens, s)])
        else:
            ns = 4097
            if self.k2 == 1:
                sgrid = np.linspace(lo2[0], hi2[0], ns)[:, None]
            else:
                side = int(math.sqrt(ns)) + 1
                axes = [np.linspace(lo2[d], hi2[d], side)
                        for d in range(self.k2)]
                sgrid = np.stack(np.meshgrid(*axes, indexing="ij"),
                                 axis=-1).reshape(-1, self.k2)
            m2 = np.exp(self.marginal2_log_density(sgrid))
            wts = np.full(sgrid.shape[0], 1.0)
            if self.k2 == 1:
                wts = np.gradient(sgrid[:, 0])
            else:
                cell = math.prod((hi2[d] - lo2[d]) / (side - 1)
                                 for d in range(self.k2))
                wts *= cell
            mu = -(sgrid @ self.ainv_b.T[:, j])
            sd = self.cond_sd[j]
            s = np.linspace(mu.min() - _NSD * sd, mu.max() + _NSD * sd, 2049)
            cdf = np.empty_like(s)
            for a in range(0, s.size, 256):
                blk = s[a : a + 256, None]
                cdf[a : a + 256] = np.sum(
                    m2 * wts * ndtr((blk - mu[None, :]) / sd), axis=1)
        self._marginal_cache[j] = (s, cdf)
        return s, cdf

    def marginal_cdf(self, j, x):
        x = np.asarray(x, dtype=float)
        s, cdf = self._marginal_grid(j)
        return np.interp(x, s, cdf, left=0.0, right=cdf[-1])

    # -- sampling (internal; the public samplers live in modelavg.sampling)

    def sample(self, n_draws, rng):
        w = self.sigma * rng.standard_normal((n_draws, self.k1))
        v2 = self.c_vec + self.sigma * rng.standard_normal((n_draws, self.k2))
        u = sm.forward(self.shrink, v2)
        t2 = u @ self.m_inv.T - self.omega
        t1 = (w - t2 @ self.b_mat.T) @ self.a_inv.T
        return np.hstack([t1, t2])


class _NormalCore:
    """Centered Gaussian with covariance sigma^2 * Q^{-1}."""

    def __init__(self, cov):
        self.cov = np.atleast_2d(np.asarray(cov, float))
        self.k = self.cov.shape[0]
        self.prec = np.linalg.inv(self.cov)
        self.log_det_cov = np.linalg.slogdet(self.cov)[1]
        self.sd = np.sqrt(np.diag(self.cov))

    def log_density(self, t):
        t = np.asarray(t, dtype=float)
        quad = np.einsum("...i,ij,...j->...", t, self.prec, t)
        return -0.5 * (self.k * math.log(2 * math.pi)
                       + self.log_det_cov + quad)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        if self.k == 1:
            return float(ndtr(t[0] / self.sd[0]))
        return float(multivariate_normal(mean=np.zeros(self.k),
                                         cov=self.cov).cdf(t))

    def marginal_cdf(self, j, x):
        return ndtr(np.asarray(x, float) / self.sd[j])

    def envelope_box(self):
        return -_NSD * self.sd, _NSD * self.sd

    def sample(self, n_draws, rng):
        chol = np.linalg.cholesky(self.cov)
        return rng.standard_normal((n_draws, self.k)) @ chol.T


class _LawBase:
    """Shared evaluation API over a radial or normal core."""

    _core: object

    def log_density(self, t):
        return self._core.log_density(t)

    def pdf(self, t):
        return np.exp(self._core.log_density(t))

    def cdf(self, t, method: str = "quadrature",
            n_mc: int = 200_000, seed: int = 0):
        """Orthant probability P(T <= t).

        The quadrature path is deterministic and supports k <= 3; the Monte
        Carlo path works for any k and returns (estimate, standard_error).
        """
        if method == "quadrature":
            return self._core.cdf(np.asarray(t, float))
        if method == "mc":
            rng = np.random.Generator(
                np.random.Philox(key=np.array([seed, 0xCDF], dtype=np.uint64)))
            draws = self._core.sample(n_mc, rng)
            hits = np.all(draws <= np.asarray(t, float), axis=1)
            p = float(np.mean(hits))
            return p, math.sqrt(max(p * (1.0 - p), 1e-12) / n_mc)
        raise ValueError(f"unknown cdf method {method!r}")

    def marginal_cdf(self, j, x):
        return self._core.marginal_cdf(j, x)

    def envelope_box(self):
        return self._core.envelope_box()


class FiniteSampleLaw(_LawBase):
    """Exact law of sqrt(n)*(beta_tilde - beta) for a concrete design."""

    def __init__(self, design: PartitionedDesign, beta, cfg: AveragingConfig):
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (design.k,):
            raise ValueError(f"beta must have shape ({design.k},)")
        self.design = design
        self.beta = beta
        self.cfg = cfg
        self.shrink = sm.ShrinkMap.from_tuning(cfg.alpha, cfg.sigma, design.k2)
        rn = math.sqrt(design.n)
        self._core = _RadialGaussianCore(
            a_mat=design.x1tx1_root / rn,
            b_mat=design.x1tx1_inv_root @ (design.x1.T @ design.x2) / rn,
            m_mat=design.s2_root / rn,
            omega=rn * beta[design.k1 :],
            sigma=cfg.sigma,
            shrink=self.shrink,
        )

    @property
    def k(self):
        return self.design.k


class AsymptoticLaw(_LawBase):
    """Limit law for gamma in R^{k2}, or N(0, sigma^2 Q^{-1}) at infinity."""

    def __init__(self, limit: LimitDesign, gamma, sigma: float, alpha: float):
        if sigma <= 0 or alpha <= 0:
            raise ValueError("sigma and alpha must be positive")
        self.limit = limit
        self.sigma = float(sigma)
        self.alpha = float(alpha)
        if np.isscalar(gamma) and np.isinf(gamma):
            self.gamma = AT_INFINITY
            self._core = _NormalCore(sigma**2 * np.linalg.inv(limit.q))
        else:
            gamma = np.asarray(gamma, dtype=float).ravel()
            if gamma.shape != (limit.k2,):
                raise ValueError(f"gamma must have shape ({limit.k2},)")
            self.gamma = gamma
            self.shrink = sm.ShrinkMap.from_tuning(alpha, sigma, limit.k2)
            self._core = _RadialGaussianCore(
                a_mat=limit.q11_root,
                b_mat=limit.q11_inv_root @ limit.q12,
                m_mat=limit.schur_root,
                omega=gamma,
                sigma=sigma,
                shrink=self.shrink,
            )

    @property
    def is_normal(self):
        return np.isscalar(self.gamma) and np.isinf(self.gamma)

    @property
    def k(self):
        return self.limit.k


def finite_log_density(law: FiniteSampleLaw, t):
    return law.log_density(t)


def asymptotic_log_density(law: AsymptoticLaw, t):
    return law.log_density(t)


def cdf(law, t, **kwargs):
    return law.cdf(t, **kwargs)


def transformed_density(law, a_mat, s):
    """Density of the image under a nonsingular square map at the point s."""
    a_mat = np.atleast_2d(np.asarray(a_mat, float))
    k = law.k
    if a_mat.shape != (k, k):
        raise UnsupportedDimensionError(
            f"transform must be square {k}x{k}, got {a_mat.shape}")
    sign, logdet = np.linalg.slogdet(a_mat)
    if sign == 0 or not np.isfinite(logdet):
        raise ValueError("transform matrix is singular")
    return float(np.exp(law.log_density(np.linalg.solve(a_mat, np.asarray(s, float)))
                        - logdet))


def _box_of(obj, box):
    if box is not None:
        return np.asarray(box[0], float), np.asarray(box[1], float)
    return obj.envelope_box()


def l1_distance(law_a, law_b, box=None, resolution: int = 301) -> float:
    """Integral of |f_a - f_b| over a box by tensor-product trapezoid rule.

    With the default envelope box the truncated tail mass is far below the
    quadrature resolution, so the result is a faithful L1 distance in [0, 2].
    """
    lo_a, hi_a = _box_of(law_a, box)
    lo_b, hi_b = _box_of(law_b, box)
    lo, hi = np.minimum(lo_a, lo_b), np.maximum(hi_a, hi_b)
    k = lo.size
    axes = [np.linspace(lo[d], hi[d], resolution) for d in range(k)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    diff = np.abs(law_a.pdf(mesh) - law_b.pdf(mesh))
    for d in reversed(range(k)):
        diff = np.trapezoid(diff, axes[d], axis=-1)
    return float(diff)
