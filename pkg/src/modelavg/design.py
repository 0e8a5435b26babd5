"""Partitioned regression design algebra.

Caches the projections, symmetric matrix roots, and coefficient matrices that
the estimator, the exact distributions, and the samplers all share.  Designs
are immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_RANK_TOL = 1e-10
_EIG_TOL = 1e-12
_SYM_TOL = 1e-10


class DesignSingularError(ValueError):
    """Raised when a design matrix is (numerically) rank deficient."""


def sym_sqrt(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric positive definite square root and its inverse.

    Computed from the eigendecomposition of the symmetrized input; eigenvalues
    must exceed ``1e-12 * lambda_max``.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("sym_sqrt requires a square matrix")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > _SYM_TOL * scale:
        raise ValueError("sym_sqrt requires a symmetric matrix")
    sym = 0.5 * (a + a.T)
    vals, vecs = np.linalg.eigh(sym)
    if vals[-1] <= 0 or vals[0] <= _EIG_TOL * vals[-1]:
        raise ValueError("sym_sqrt requires a positive definite matrix")
    root = (vecs * np.sqrt(vals)) @ vecs.T
    inv_root = (vecs / np.sqrt(vals)) @ vecs.T
    return 0.5 * (root + root.T), 0.5 * (inv_root + inv_root.T)


@dataclass(frozen=True)
class PartitionedDesign:
    """An n x k design split as [X1 : X2] with cached derived matrices."""

    x: np.ndarray
    k1: int
    k2: int
    gram: np.ndarray          # X'X
    x1tx1: np.ndarray
    x1tx1_root: np.ndarray    # (X1'X1)^{1/2}
    x1tx1_inv_root: np.ndarray
    p_r: np.ndarray           # projection on col(X1)
    p_u: np.ndarray           # projection on col(X)
    s2: np.ndarray            # X2'(I - P_R)X2
    s2_root: np.ndarray
    s2_inv_root: np.ndarray
    b_mat: np.ndarray         # B_n, k x k2
    c_mat: np.ndarray         # C_n, k x k1
    d_mat: np.ndarray         # D_n, k x k2
    lam_min: float            # lambda_min(X'X/n)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def k(self) -> int:
        return self.k1 + self.k2

    @property
    def x1(self) -> np.ndarray:
        return self.x[:, : self.k1]

    @property
    def x2(self) -> np.ndarray:
        return self.x[:, self.k1 :]

    @classmethod
    def from_matrix(cls, x: np.ndarray, k1: int) -> "PartitionedDesign":
        x = np.array(x, dtype=float)
        if x.ndim != 2:
            raise ValueError("design matrix must be 2-dimensional")
        n, k = x.shape
        if not 1 <= k1 < k:
            raise ValueError(f"k1 must satisfy 1 <= k1 < k={k}, got {k1}")
        if n < k:
            raise ValueError(f"need n >= k, got n={n}, k={k}")
        k2 = k - k1
        gram = x.T @ x
        evals = np.linalg.eigvalsh(0.5 * (gram + gram.T))
        if evals[0] <= _RANK_TOL * evals[-1]:
            raise DesignSingularError(
                f"design is numerically rank deficient "
                f"(lambda_min/lambda_max = {evals[0] / evals[-1]:.3e})"
            )
        x1, x2 = x[:, :k1], x[:, k1:]
        x1tx1 = x1.T @ x1
        r11, ir11 = sym_sqrt(x1tx1)
        inv11 = ir11 @ ir11
        p_r = x1 @ inv11 @ x1.T
        inv = np.linalg.inv(gram)
        p_u = x @ inv @ x.T
        x1tx2 = x1.T @ x2
        s2 = x2.T @ x2 - x1tx2.T @ inv11 @ x1tx2
        s2 = 0.5 * (s2 + s2.T)
        s2_root, s2_inv_root = sym_sqrt(s2)
        top = inv11 @ x1tx2
        b_mat = np.vstack([top, -np.eye(k2)])
        c_mat = np.vstack([ir11, np.zeros((k2, k1))])
        d_mat = np.vstack([-top @ s2_inv_root, s2_inv_root])
        return cls(
            x=x, k1=k1, k2=k2, gram=gram, x1tx1=x1tx1,
            x1tx1_root=r11, x1tx1_inv_root=ir11,
            p_r=p_r, p_u=p_u, s2=s2, s2_root=s2_root, s2_inv_root=s2_inv_root,
            b_mat=b_mat, c_mat=c_mat, d_mat=d_mat,
            lam_min=float(evals[0] / n),
        )


def new_partitioned_design(x: np.ndarray, k1: int) -> PartitionedDesign:
    return PartitionedDesign.from_matrix(x, k1)


@dataclass(frozen=True)
class LimitDesign:
    """Limit Gram matrix Q with its blocks and limit coefficient matrices."""

    q: np.ndarray
    k1: int
    k2: int
    q11: np.ndarray
    q12: np.ndarray
    q21: np.ndarray
    q22: np.ndarray
    q11_root: np.ndarray
    q11_inv_root: np.ndarray
    schur: np.ndarray          # Q22 - Q21 Q11^{-1} Q12
    schur_root: np.ndarray     # = D_inf2^{-1}
    schur_inv_root: np.ndarray # = D_inf2
    b_mat: np.ndarray
    c_mat: np.ndarray
    d_mat: np.ndarray

    @property
    def k(self) -> int:
        return self.k1 + self.k2

    @classmethod
    def from_q(cls, q: np.ndarray, k1: int) -> "LimitDesign":
        q = np.array(q, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError("Q must be a square matrix")
        k = q.shape[0]
        if not 1 <= k1 < k:
            raise ValueError(f"k1 must satisfy 1 <= k1 < k={k}, got {k1}")
        k2 = k - k1
        try:
            _root, _inv_root = sym_sqrt(q)
        except ValueError as exc:
            raise DesignSingularError(f"Q is not SPD: {exc}") from exc
        q11, q12 = q[:k1, :k1], q[:k1, k1:]
        q21, q22 = q[k1:, :k1], q[k1:, k1:]
        r11, ir11 = sym_sqrt(q11)
        inv11 = ir11 @ ir11
        schur = q22 - q21 @ inv11 @ q12
        schur = 0.5 * (schur + schur.T)
        try:
            s_root, s_inv_root = sym_sqrt(schur)
        except ValueError as exc:
            raise DesignSingularError(
                f"Schur complement is not SPD: {exc}"
            ) from exc
        top = inv11 @ q12
        return cls(
            q=q, k1=k1, k2=k2, q11=q11, q12=q12, q21=q21, q22=q22,
            q11_root=r11, q11_inv_root=ir11,
            schur=schur, schur_root=s_root, schur_inv_root=s_inv_root,
            b_mat=np.vstack([top, -np.eye(k2)]),
            c_mat=np.vstack([ir11, np.zeros((k2, k1))]),
            d_mat=np.vstack([-top @ s_inv_root, s_inv_root]),
        )


def new_limit_design(q: np.ndarray, k1: int) -> LimitDesign:
    return LimitDesign.from_q(q, k1)


def exact_gram_design(n: int, q: np.ndarray, k1: int,
                      orth_seed: int = 0) -> PartitionedDesign:
    """A design X with X'X = n*Q exactly, via an orthonormal column frame.

    The frame comes from a QR factorization of counter-based Gaussian noise,
    so the design is a pure function of (n, Q, k1, orth_seed).
    """
    q = np.asarray(q, dtype=float)
    k = q.shape[0]
    if n < k:
        raise ValueError(f"need n >= k, got n={n}, k={k}")
    root, _ = sym_sqrt(q)
    rng = np.random.Generator(
        np.random.Philox(key=np.array([orth_seed, 0xD351], dtype=np.uint64))
    )
    frame, r = np.linalg.qr(rng.standard_normal((n, k)))
    frame = frame * np.sign(np.diag(r))
    return PartitionedDesign.from_matrix(math.sqrt(n) * frame @ root, k1)
