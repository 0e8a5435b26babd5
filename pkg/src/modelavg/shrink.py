"""Radial shrink map and the density machinery it induces.

The map ``T(x) = x / (1 + a*exp(-||x||^2/b))`` contracts vectors toward the
origin.  Its scalar radial profile ``h`` is strictly increasing with inverse
``g``; the change-of-variables Jacobian of ``T`` supplies the non-Gaussian
factor in the averaging estimator's density.  In applications the parameters
are ``a = exp(2*alpha*k2)`` and ``b = sigma^2/alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

_MAX_NEWTON = 200
_G_TOL = 1e-14


@dataclass(frozen=True)
class ShrinkMap:
    """Parameters (a, b) and dimension m of the radial contraction."""

    a: float
    b: float
    m: int = 1
    log_a: float = field(init=False, repr=False)

    def __post_init__(self):
        if not (np.isfinite(self.a) and self.a > 0):
            raise ValueError(f"a must be positive and finite, got {self.a}")
        if not (np.isfinite(self.b) and self.b > 0):
            raise ValueError(f"b must be positive and finite, got {self.b}")
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        object.__setattr__(self, "log_a", math.log(self.a))

    @classmethod
    def from_tuning(cls, alpha: float, sigma: float, k2: int) -> "ShrinkMap":
        """Build the map used by the averaging estimator's distribution."""
        if alpha <= 0 or sigma <= 0:
            raise ValueError("alpha and sigma must be positive")
        return cls(a=math.exp(2.0 * alpha * k2), b=sigma * sigma / alpha, m=k2)


def h(smap: ShrinkMap, xi):
    """Scalar radial profile h(xi) = xi / (1 + a*exp(-xi^2/b)), xi >= 0."""
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0):
        raise ValueError("h requires xi >= 0")
    out = xi * expit(xi * xi / smap.b - smap.log_a)
    return float(out) if out.ndim == 0 else out


def g(smap: ShrinkMap, zeta):
    """Inverse of h on [0, inf), solved by safeguarded Newton in [z, (1+a)z].

    The bracket is analytic: xi/(1+a) <= h(xi) <= xi.  Newton steps that leave
    the current bracket fall back to bisection.
    """
    zeta_in = np.asarray(zeta, dtype=float)
    if np.any(zeta_in < 0):
        raise ValueError("g requires zeta >= 0")
    z = np.atleast_1d(zeta_in).astype(float).ravel()
    a, b, log_a = smap.a, smap.b, smap.log_a

    lo = z.copy()
    hi = (1.0 + a) * z
    xi = np.clip(z * (1.0 + a * np.exp(-z * z / b)), lo, hi)
    tol = _G_TOL * np.maximum(1.0, z)
    done = z == 0.0
    step_old = hi - lo
    for _ in range(_MAX_NEWTON):
        s = expit(xi * xi / b - log_a)
        f = xi * s - z
        # the bracket-collapse test absorbs the ~eps*xi evaluation floor of h
        done = done | (np.abs(f) <= tol) | (hi - lo <= 4e-16 * np.abs(xi))
        if done.all():
            break
        lo = np.where(~done & (f < 0), xi, lo)
        hi = np.where(~done & (f > 0), xi, hi)
        ae = a * np.exp(-xi * xi / b)
        deriv = s * (1.0 + (2.0 * xi * xi / b) * ae * s)
        with np.errstate(invalid="ignore", divide="ignore"):
            cand = xi - f / deriv
        # bisect when Newton leaves the bracket or fails to shrink the step;
        # without the step test Newton can ping-pong across the sigmoid's
        # transition while staying inside a slowly-moving bracket
        bad = (
            ~np.isfinite(cand)
            | (cand <= lo)
            | (cand >= hi)
            | (np.abs(2.0 * f) > np.abs(step_old * deriv))
        )
        cand = np.where(bad, 0.5 * (lo + hi), cand)
        step_old = np.abs(cand - xi)
        xi = np.where(done, xi, cand)
    else:
        # Bisection safeguard guarantees convergence; reaching here is a bug.
        raise RuntimeError("g: safeguarded Newton failed to converge")
    if zeta_in.ndim == 0:
        return float(xi[0])
    return xi.reshape(zeta_in.shape)


def g_ratio(smap: ShrinkMap, zeta):
    """g(zeta)/zeta with the continuity value 1+a at zeta = 0."""
    zeta = np.asarray(zeta, dtype=float)
    gz = np.asarray(g(smap, zeta))
    safe = np.where(zeta > 0, zeta, 1.0)
    out = np.where(zeta > 0, gz / safe, 1.0 + smap.a)
    return float(out) if out.ndim == 0 else out


def forward(smap: ShrinkMap, x):
    """Vector map T(x); accepts a single vector or an (..., m) batch."""
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1, keepdims=True)
    return x * expit(r2 / smap.b - smap.log_a)


def inverse(smap: ShrinkMap, y):
    """Inverse map T^{-1}(y) = g(||y||) y/||y||, with T^{-1}(0) = 0."""
    y = np.asarray(y, dtype=float)
    r = np.linalg.norm(y, axis=-1)
    ratio = g_ratio(smap, r)
    return y * np.expand_dims(np.asarray(ratio), -1)


def jacobian_det(smap: ShrinkMap, x):
    """det of the derivative of T at x; strictly positive everywhere."""
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    s = expit(r2 / smap.b - smap.log_a)
    out = s**smap.m * (1.0 + (2.0 * r2 / smap.b) * (1.0 - s))
    return float(out) if out.ndim == 0 else out


def log_density_factor(smap: ShrinkMap, q):
    """log of 1/det(DT) evaluated at radius g(q), computed in log space.

    This is the combined correction factor the pushforward through T
    contributes to the density at a point with image radius q.
    """
    q = np.asarray(q, dtype=float)
    if np.any(q < 0):
        raise ValueError("log_density_factor requires q >= 0")
    r = np.asarray(g(smap, q))
    e = smap.log_a - r * r / smap.b
    out = smap.m * np.logaddexp(0.0, e) - np.log1p(
        (2.0 * r * r / smap.b) * expit(e)
    )
    return float(out) if out.ndim == 0 else out


def tail_gap(smap: ShrinkMap, zeta):
    """g(zeta) - zeta; positive for zeta > 0 and decaying to 0 at infinity."""
    zeta = np.asarray(zeta, dtype=float)
    if np.any(zeta <= 0):
        raise ValueError("tail_gap requires zeta > 0")
    out = np.asarray(g(smap, zeta)) - zeta
    return float(out) if out.ndim == 0 else out
