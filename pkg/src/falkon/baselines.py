"""Reference solvers: exact KRR, direct Nystrom, and unpreconditioned iterations.

All Nystrom baselines use the normalized system

    H alpha = z,    H = K_nM^T K_nM / n + lam K_MM,    z = K_nM^T y / n,

which has the same solution as the unnormalized one. The iterative
baselines stream ``K_nM`` in row blocks exactly like the FALKON solver.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .data import Dataset
from .kernels import KernelSpec, kernel_square
from .linalg import DEFAULT_RANK_TOL, DivergenceError, NotPositiveDefiniteError, cholesky_upper, conjugate_gradient
from .metrics import regression_metrics
from .sampling import CenterSelection
from .solver import FalkonModel, KernelOperator, _power_lambda_max, falkon_predict

__all__ = [
    "DENSE_CAP",
    "DenseCapError",
    "IterTrace",
    "krr_direct",
    "nystrom_direct",
    "gd_nystrom",
    "cg_nystrom_unpreconditioned",
    "Tracer",
]

DENSE_CAP = 4000
EPS = np.finfo(np.float64).eps


class DenseCapError(ValueError):
    """A dense O(n^3) oracle was asked to run above its size cap."""


@dataclass
class IterTrace:
    """Per-iteration record: objective on the training set, optional test metric, wall time."""

    iteration: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    test_metric: list = field(default_factory=list)
    seconds: list = field(default_factory=list)

    def append(self, k, objective, test_metric=None, seconds=0.0):
        if self.iteration and k <= self.iteration[-1]:
            raise ValueError("iteration indices must be strictly increasing")
        self.iteration.append(int(k))
        self.objective.append(float(objective))
        self.test_metric.append(None if test_metric is None else float(test_metric))
        self.seconds.append(float(seconds))

    def __len__(self):
        return len(self.iteration)

    def to_csv(self, path, timings=True):
        """``iteration,objective,test_metric,seconds``; ``timings=False`` writes 0 seconds."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "objective", "test_metric", "seconds"])
            for k, obj, tm, s in zip(self.iteration, self.objective, self.test_metric, self.seconds):
                w.writerow([k, repr(obj), "" if tm is None else repr(tm), repr(s) if timings else "0"])


class Tracer:
    """Callback that records objective and test RMSE for a sequence of ``alpha``.

    ``alpha`` is the coefficient vector over ``centers``; the objective is
    ``|K_nM alpha - y|^2 / n + lam alpha^T K_MM alpha``.
    """

    def __init__(self, train: Dataset, centers, kernel: KernelSpec, lam, test: Dataset | None = None,
                 metric=None, block_rows=None):
        self.op = KernelOperator(train.features, centers, kernel, block_rows)
        self.y = train.labels
        self.K_MM = kernel_square(kernel, centers)
        self.lam = lam
        self.centers = np.asarray(centers)
        self.kernel = kernel
        self.test = test
        self.metric = metric or (lambda y, p: regression_metrics(y, p)["rmse"])
        self.trace = IterTrace()
        self.t0 = time.perf_counter()

    def objective(self, alpha):
        r = self.op.knm(alpha) - self.y
        return float(r @ r) / len(self.y) + self.lam * float(alpha @ self.K_MM @ alpha)

    def __call__(self, k, alpha):
        elapsed = time.perf_counter() - self.t0
        tm = None
        if self.test is not None:
            pred = falkon_predict(FalkonModel(self.centers, alpha, self.kernel), self.test.features)
            tm = self.metric(self.test.labels, pred)
        self.trace.append(k, self.objective(alpha), tm, elapsed)


def _check_cap(size, cap, what):
    if cap is not None and size > cap:
        raise DenseCapError(
            f"{what} forms a dense {size}x{size} system, above the cap of {cap}; "
            "use the FALKON solver or raise the cap explicitly"
        )


def krr_direct(train: Dataset, kernel: KernelSpec, lam, cap=DENSE_CAP) -> FalkonModel:
    """Exact kernel ridge regression: ``(K_nn + lam n I) alpha = y``."""
    n = train.n
    _check_cap(n, cap, "krr_direct")
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    K = kernel_square(kernel, train.features)
    K.flat[:: n + 1] += lam * n
    c = sla.cho_factor(K, lower=False)
    alpha = sla.cho_solve(c, train.labels)
    centers = train.features.toarray() if train.is_sparse else train.features
    return FalkonModel(centers, alpha, kernel, info={"method": "cholesky"})


def nystrom_direct(train: Dataset, centers: CenterSelection, kernel: KernelSpec, lam, cap=DENSE_CAP,
                   method="auto", rank_tol=DEFAULT_RANK_TOL) -> FalkonModel:
    """Direct solve of the Nystrom system over the kept centers.

    ``method="cholesky"`` factors ``H + eps M I``. ``method="lstsq"`` is the
    pseudo-inverse solve: ``alpha`` is restricted to the numerical range of
    ``K_MM`` (eigenvalues above ``rank_tol`` times the largest), ``alpha = U g``,
    and ``g`` solves

        min |K_nM U g|^2 / n - 2 y^T K_nM U g / n + lam |S^{1/2} g|^2

    as a stacked least-squares problem. Restricting to the range matters:
    rounding leaves ``K_nM`` slightly nonzero on the null space of ``K_MM``,
    and an unrestricted least-squares fit exploits it. ``auto`` tries Cholesky
    and falls back to ``lstsq``; ``model.info["method"]`` records which ran.
    """
    M = centers.M
    _check_cap(M, cap, "nystrom_direct")
    C = centers.centers_of(train.features)
    Knm = KernelOperator(train.features, C, kernel).dense()
    K_MM = kernel_square(kernel, C)
    n = train.n
    y = train.labels
    if method in ("auto", "cholesky"):
        H = Knm.T @ Knm / n + lam * K_MM
        H = 0.5 * (H + H.T)
        H.flat[:: M + 1] += EPS * M
        try:
            R = cholesky_upper(H)
        except NotPositiveDefiniteError:
            if method == "cholesky":
                raise
        else:
            z = Knm.T @ y / n
            alpha = sla.solve_triangular(R, sla.solve_triangular(R, z, trans=1), trans=0)
            return FalkonModel(C, alpha, kernel, info={"method": "cholesky"})
    elif method != "lstsq":
        raise ValueError(f"unknown method {method!r}")
    w, U = sla.eigh(K_MM)
    keep = w > rank_tol * w[-1] if w[-1] > 0 else np.zeros(M, dtype=bool)
    if not keep.any():
        raise ValueError("degenerate centers: kernel matrix of the centers is zero")
    U, w = U[:, keep], w[keep]
    stacked = np.vstack([Knm @ U / np.sqrt(n), np.diag(np.sqrt(lam * w))])
    rhs = np.concatenate([y / np.sqrt(n), np.zeros(w.size)])
    g = sla.lstsq(stacked, rhs, lapack_driver="gelsd")[0]
    return FalkonModel(C, U @ g, kernel, info={"method": "lstsq", "rank": int(w.size)})


def _normalized_H(train, C, kernel, lam, block_rows):
    op = KernelOperator(train.features, C, kernel, block_rows)
    K_MM = kernel_square(kernel, C)
    n = train.n

    def apply_H(u):
        return op.knm_t_knm(u) / n + lam * (K_MM @ u)

    z = op.knm_t(train.labels) / n
    return apply_H, z


def gd_nystrom(train: Dataset, centers: CenterSelection, kernel: KernelSpec, lam, t, tau=None,
               test: Dataset | None = None, block_rows=None, seed=0, metric=None):
    """Plain gradient descent ``alpha_k = alpha_{k-1} - tau (H alpha_{k-1} - z)`` from zero.

    ``tau`` defaults to ``1 / L`` with ``L`` a 20-step power-iteration
    estimate of ``lambda_max(H)``. ``metric(y, pred)`` scores the test set
    (default RMSE). Returns ``(model, trace)``.
    """
    C = centers.centers_of(train.features)
    apply_H, z = _normalized_H(train, C, kernel, lam, block_rows)
    if tau is None:
        tau = 1.0 / _power_lambda_max(apply_H, C.shape[0], seed=seed)
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    trace = IterTrace()
    yy = float(train.labels @ train.labels) / train.n
    tracer = Tracer(train, C, kernel, lam, test, metric, block_rows) if test is not None else None
    alpha = np.zeros(C.shape[0])
    Ha = np.zeros_like(alpha)
    t0 = time.perf_counter()
    for k in range(1, t + 1):
        alpha = alpha - tau * (Ha - z)
        if not np.all(np.isfinite(alpha)):
            raise DivergenceError(k)
        Ha = apply_H(alpha)
        obj = float(alpha @ Ha) - 2.0 * float(alpha @ z) + yy
        tm = None
        if tracer is not None:
            pred = falkon_predict(FalkonModel(C, alpha, kernel), test.features)
            tm = tracer.metric(test.labels, pred)
        trace.append(k, obj, tm, time.perf_counter() - t0)
    model = FalkonModel(C, alpha, kernel, info={"tau": float(tau)})
    return model, trace


def cg_nystrom_unpreconditioned(train: Dataset, centers: CenterSelection, kernel: KernelSpec, lam, t,
                                test: Dataset | None = None, block_rows=None, trace=True, metric=None):
    """Conjugate gradient on ``H alpha = z`` without preconditioning. Returns ``(model, trace)``."""
    C = centers.centers_of(train.features)
    apply_H, z = _normalized_H(train, C, kernel, lam, block_rows)
    tracer = Tracer(train, C, kernel, lam, test, metric, block_rows) if trace else None
    alpha = conjugate_gradient(apply_H, z, t, callback=tracer)
    return FalkonModel(C, alpha, kernel), (tracer.trace if tracer is not None else IterTrace())
