"""The Nystrom preconditioner ``B = D Q T^{-1} A^{-1} / sqrt(n)``.

``T`` and ``A`` are upper triangular with

    D K_MM D = Q T^T T Q^T,        A^T A = T T^T / M + lam I,

where ``Q`` (``M x q``) has orthonormal columns spanning the range of
``D K_MM D`` and ``D`` is the positive center reweighting. With uniform
centers and a nonsingular ``K_MM`` the fast path takes ``Q = I`` and
``D = I`` and needs only two Cholesky factorizations. Otherwise ``Q`` comes
from a column-pivoted QR (default) or an eigendecomposition.

``B`` is never formed; :func:`apply_B` and :func:`apply_Bt` apply it with
triangular solves.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .linalg import (
    DEFAULT_RANK_TOL,
    NotPositiveDefiniteError,
    cholesky_upper,
    pivoted_qr,
    sym_eig,
    tri_solve,
)

__all__ = [
    "DegenerateCentersError",
    "PreconditionerFactors",
    "build_full_rank",
    "build_rank_deficient",
    "build_preconditioner",
    "apply_B",
    "apply_Bt",
    "dense_B",
    "BACKENDS",
]

BACKENDS = ("auto", "cholesky", "pivoted_qr", "eigendecomposition")
EPS = np.finfo(np.float64).eps


class DegenerateCentersError(ValueError):
    """The center kernel matrix has numerical rank zero."""


@dataclass(frozen=True)
class PreconditionerFactors:
    """Everything needed to apply ``B`` and ``B^T``.

    ``Q is None`` means the identity (fast path); ``D`` is the length-``M``
    diagonal. ``path`` names the construction that produced the factors and
    ``fell_back`` is set when the Cholesky fast path failed and the
    rank-revealing construction was used instead.
    """

    n: int
    M: int
    q: int
    D: np.ndarray
    Q: np.ndarray | None
    T: np.ndarray
    A: np.ndarray
    lam: float
    jitter: float
    path: str
    fell_back: bool = False


def _check_sym(K):
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError(f"K_MM must be square, got {K.shape}")
    return K


def _second_factor(T, lam, M):
    S = T @ T.T / M
    S.flat[:: S.shape[0] + 1] += lam
    return cholesky_upper(S)


def build_full_rank(K_MM, lam, n, D=None, fallback="pivoted_qr", rank_tol=DEFAULT_RANK_TOL):
    """Fast path: ``T = chol(D K D + eps M I)``, ``A = chol(T T^T / M + lam I)``.

    If the first Cholesky factorization fails, the factors are built by
    :func:`build_rank_deficient` with ``backend=fallback`` and flagged with
    ``fell_back=True``.
    """
    K = _check_sym(K_MM)
    M = K.shape[0]
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    d = np.ones(M) if D is None else np.asarray(D, dtype=np.float64)
    S = K if D is None else d[:, None] * K * d[None, :]
    jitter = EPS * M
    S = S + jitter * np.eye(M)
    try:
        T = cholesky_upper(S)
    except NotPositiveDefiniteError:
        F = build_rank_deficient(K, d, lam, n, backend=fallback, rank_tol=rank_tol)
        return replace(F, fell_back=True)
    A = _second_factor(T, lam, M)
    Q = None if D is None else np.eye(M)
    return PreconditionerFactors(n, M, M, d, Q, T, A, float(lam), jitter, "cholesky")


def build_rank_deficient(K_MM, D, lam, n, backend="pivoted_qr", rank_tol=DEFAULT_RANK_TOL):
    """Rank-revealing construction valid for singular ``K_MM``.

    ``pivoted_qr``: ``(Q, R) = qr(D K D)`` truncated to rank ``q`` and
    ``T = chol(Q^T D K D Q)``. ``eigendecomposition``: ``Q`` holds the leading
    ``q`` eigenvectors of ``D K D`` and ``T = diag(sqrt(eigenvalues))``.
    """
    K = _check_sym(K_MM)
    M = K.shape[0]
    d = np.ones(M) if D is None else np.asarray(D, dtype=np.float64)
    if d.shape != (M,) or not np.all(d > 0):
        raise ValueError("D must be a positive vector of length M")
    S = d[:, None] * K * d[None, :]
    S = 0.5 * (S + S.T)
    jitter = EPS * M
    if backend == "pivoted_qr":
        Q, _, q, _ = pivoted_qr(S, rank_tol)
        if q == 0:
            raise DegenerateCentersError("degenerate centers: kernel matrix of the centers is zero")
        Sq = Q.T @ S @ Q
        Sq = 0.5 * (Sq + Sq.T)
        Sq.flat[:: q + 1] += jitter
        T = cholesky_upper(Sq)
        A = _second_factor(T, lam, M)
    elif backend == "eigendecomposition":
        w, U = sym_eig(S)
        if w[0] <= 0:
            raise DegenerateCentersError("degenerate centers: kernel matrix of the centers is zero")
        q = int(np.count_nonzero(w > rank_tol * w[0]))
        Q = U[:, :q]
        T = np.diag(np.sqrt(w[:q]))
        A = np.diag(np.sqrt(lam + w[:q] / M))
    else:
        raise ValueError(f"unknown backend {backend!r}; expected pivoted_qr or eigendecomposition")
    return PreconditionerFactors(n, M, q, d, Q, T, A, float(lam), jitter, backend)


def build_preconditioner(K_MM, lam, n, D=None, backend="auto", rank_tol=DEFAULT_RANK_TOL):
    """Dispatch on ``backend``.

    ``auto`` takes the Cholesky fast path when ``D`` is absent (uniform
    centers) and the rank-revealing QR path otherwise.
    """
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
    if backend == "auto":
        backend = "cholesky" if D is None else "pivoted_qr"
    if backend == "cholesky":
        return build_full_rank(K_MM, lam, n, D=D, rank_tol=rank_tol)
    return build_rank_deficient(K_MM, D, lam, n, backend=backend, rank_tol=rank_tol)


def _scale_rows(d, v):
    return d * v if v.ndim == 1 else d[:, None] * v


def apply_B_unscaled(F: PreconditionerFactors, beta):
    """``D Q T^{-1} A^{-1} beta`` (that is ``sqrt(n) B beta``)."""
    u = tri_solve(F.T, tri_solve(F.A, beta))
    if F.Q is not None:
        u = F.Q @ u
    return _scale_rows(F.D, u)


def apply_Bt_unscaled(F: PreconditionerFactors, v):
    """``A^{-T} T^{-T} Q^T D v`` (that is ``sqrt(n) B^T v``)."""
    u = _scale_rows(F.D, np.asarray(v, dtype=np.float64))
    if F.Q is not None:
        u = F.Q.T @ u
    return tri_solve(F.A, tri_solve(F.T, u, transpose=True), transpose=True)


def apply_B(F: PreconditionerFactors, beta):
    """``B beta`` for a length-``q`` vector (or ``q x k`` matrix)."""
    return apply_B_unscaled(F, beta) / np.sqrt(F.n)


def apply_Bt(F: PreconditionerFactors, v):
    """``B^T v`` for a length-``M`` vector (or ``M x k`` matrix)."""
    return apply_Bt_unscaled(F, v) / np.sqrt(F.n)


def dense_B(F: PreconditionerFactors) -> np.ndarray:
    """Explicit ``M x q`` matrix ``B``; desk-scale diagnostics only."""
    return apply_B(F, np.eye(F.q))
