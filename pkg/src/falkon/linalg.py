"""Dense factorizations and the conjugate gradient core.

The factorizations are thin wrappers over LAPACK (through SciPy) that pin
down the conventions used elsewhere in the package: upper Cholesky factors,
column-pivoted QR truncated to a numerical rank, eigenpairs in descending
order. :func:`conjugate_gradient` runs a fixed number of iterations.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

__all__ = [
    "NotPositiveDefiniteError",
    "DivergenceError",
    "cholesky_upper",
    "pivoted_qr",
    "sym_eig",
    "tri_solve",
    "conjugate_gradient",
]

DEFAULT_RANK_TOL = 1e-10


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Cholesky hit a non-positive pivot; ``pivot`` is its 0-based index."""

    def __init__(self, pivot):
        self.pivot = pivot
        super().__init__(f"matrix is not positive definite (pivot {pivot})")


class DivergenceError(ArithmeticError):
    """An iterative solver produced a non-finite value."""

    def __init__(self, iteration, what="iterate"):
        self.iteration = iteration
        super().__init__(f"non-finite {what} at iteration {iteration}")


def cholesky_upper(S):
    """Upper-triangular ``R`` with ``R.T @ R == S``."""
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    if S.shape[0] == 0:
        return np.zeros((0, 0))
    if not np.all(np.isfinite(S)):
        raise ValueError("matrix contains NaN or Inf")
    R, info = lapack.dpotrf(S, lower=0, clean=1, overwrite_a=0)
    if info > 0:
        raise NotPositiveDefiniteError(info - 1)
    if info < 0:
        raise ValueError(f"dpotrf: illegal argument {-info}")
    return R


def pivoted_qr(S, rank_tol=DEFAULT_RANK_TOL):
    """Column-pivoted QR truncated to the numerical rank.

    Returns ``(Q, R, q, perm)`` where ``S[:, perm] ~= Q @ R``, ``Q`` has ``q``
    orthonormal columns and ``R`` is ``q x M`` upper trapezoidal. The rank
    ``q`` counts the diagonal entries of the full ``R`` with
    ``|R_ii| > rank_tol * |R_00|``.
    """
    S = np.asarray(S, dtype=np.float64)
    Q, R, perm = sla.qr(S, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        q = 0
    else:
        q = int(np.count_nonzero(diag > rank_tol * diag[0]))
    return Q[:, :q], R[:q, :], q, perm


def sym_eig(S):
    """Eigenvalues (descending) and orthonormal eigenvectors of a symmetric matrix."""
    w, U = sla.eigh(np.asarray(S, dtype=np.float64))
    return w[::-1].copy(), U[:, ::-1].copy()


def tri_solve(R, b, transpose=False):
    """Solve ``R x = b`` (or ``R.T x = b``) for upper-triangular ``R``."""
    R = np.asarray(R, dtype=np.float64)
    zero = np.flatnonzero(np.diag(R) == 0.0)
    if zero.size:
        raise np.linalg.LinAlgError(f"singular triangular matrix: zero diagonal at {zero[0]}")
    return sla.solve_triangular(R, b, lower=False, trans=1 if transpose else 0, check_finite=False)


def conjugate_gradient(apply_op, r, t_max, tol=None, callback=None):
    """Run ``t_max`` conjugate gradient iterations on ``A beta = r`` from ``beta = 0``.

    Parameters
    ----------
    apply_op : callable
        ``v -> A v`` for a symmetric positive definite ``A``.
    r : ndarray
        Right-hand side.
    t_max : int
        Number of iterations. No residual test is made unless ``tol`` is set.
    tol : float, optional
        Stop early once ``|r_k| <= tol * |r_0|``.
    callback : callable, optional
        Called as ``callback(k, beta)`` after iteration ``k`` (1-based).

    Returns
    -------
    beta : ndarray
    """
    r = np.array(r, dtype=np.float64)
    beta = np.zeros_like(r)
    p = r.copy()
    rsold = float(r @ r)
    stop = None if tol is None else (tol * tol) * rsold
    for k in range(1, int(t_max) + 1):
        if rsold == 0.0:
            # exact solution reached; further steps would divide by zero
            if callback is not None:
                callback(k, beta)
            continue
        Ap = apply_op(p)
        pAp = float(p @ Ap)
        if not np.isfinite(pAp):
            raise DivergenceError(k, "curvature")
        if pAp <= 0.0:
            raise np.linalg.LinAlgError(f"operator is not positive definite (p'Ap = {pAp:g} at iteration {k})")
        a = rsold / pAp
        beta = beta + a * p
        r = r - a * Ap
        rsnew = float(r @ r)
        if not (np.isfinite(rsnew) and np.all(np.isfinite(beta))):
            raise DivergenceError(k)
        p = r + (rsnew / rsold) * p
        rsold = rsnew
        if callback is not None:
            callback(k, beta)
        if stop is not None and rsold <= stop:
            break
    return beta
