"""Dense linear algebra used by the weight computations.

Everything runs in float64. The numerical-rank cutoff is
``max(n, d) * sigma_max * 1e-12`` throughout.
"""

from __future__ import annotations

import numpy as np

from .errors import NonFinite

RANK_RTOL = 1e-12


def as_matrix(X) -> np.ndarray:
    """Return ``X`` as a finite 2-d float64 array or raise :class:`NonFinite`."""
    A = np.asarray(X, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NonFinite("matrix contains NaN or Inf")
    return A


def rank_cutoff(sigma: np.ndarray, shape: tuple[int, int]) -> float:
    smax = float(sigma.max()) if sigma.size else 0.0
    return max(shape) * smax * RANK_RTOL


def qr_factor(X) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR factorization ``X = Q R``.

    Q is n-by-k and R is k-by-d with k = min(n, d).
    """
    A = as_matrix(X)
    Q, R = np.linalg.qr(A, mode="reduced")
    return Q, R


def pseudo_solve(M, v) -> np.ndarray:
    """Return ``M^+ v`` for a symmetric positive semidefinite ``M``.

    Singular values below the rank cutoff are treated as exact zeros, so
    components of ``v`` along the numerical null space are annihilated.
    """
    A = as_matrix(M)
    b = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(b)):
        raise NonFinite("right-hand side contains NaN or Inf")
    U, s, Vt = np.linalg.svd(A, hermitian=True)
    keep = s > rank_cutoff(s, A.shape)
    if not np.any(keep):
        return np.zeros(A.shape[1] if b.ndim == 1 else (A.shape[1], b.shape[1]))
    U, s, Vt = U[:, keep], s[keep], Vt[keep]
    coef = U.T @ b
    coef = coef / (s if b.ndim == 1 else s[:, None])
    return Vt.T @ coef


def _svd_leverage(A: np.ndarray) -> np.ndarray:
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    r = int(np.count_nonzero(s > rank_cutoff(s, A.shape)))
    return np.einsum("ij,ij->i", U[:, :r], U[:, :r])


def leverage_scores(X) -> np.ndarray:
    """Statistical leverage scores ``x_i^T (X^T X)^+ x_i``.

    Uses the squared row norms of a thin QR factor when X is numerically of
    full column rank, and an SVD otherwise. Scores lie in [0, 1] and sum to
    rank(X).
    """
    A = as_matrix(X)
    n, d = A.shape
    if n >= d:
        Q, R = np.linalg.qr(A, mode="reduced")
        s = np.linalg.svd(R, compute_uv=False)
        if s.size and s.min() > rank_cutoff(s, A.shape):
            lev = np.einsum("ij,ij->i", Q, Q)
            return np.clip(lev, 0.0, 1.0)
    return np.clip(_svd_leverage(A), 0.0, 1.0)


def numerical_rank(X) -> int:
    A = as_matrix(X)
    s = np.linalg.svd(A, compute_uv=False)
    return int(np.count_nonzero(s > rank_cutoff(s, A.shape)))
