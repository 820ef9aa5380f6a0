"""Numerical checks tied to the convergence theory.

Everything here forms dense matrices and is meant for desk-scale problems.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg as sla

from .baselines import DENSE_CAP, _check_cap
from .data import Dataset
from .kernels import KernelSpec, kernel_diag, kernel_square
from .preconditioner import PreconditionerFactors, dense_B
from .sampling import CenterSelection, exact_leverage_scores
from .solver import KernelOperator

__all__ = [
    "COND_TARGET",
    "TheoryReport",
    "explicit_W",
    "condition_number_W",
    "effective_dimension",
    "n_infinity_empirical",
    "suggested_M_uniform",
    "suggested_M_leverage",
    "cg_exponent",
    "theory_report",
]

# condition number below which the CG exponent is at least 1/2
COND_TARGET = ((math.exp(0.5) + 1.0) / (math.exp(0.5) - 1.0)) ** 2


def _centers_array(train, centers):
    if isinstance(centers, CenterSelection):
        return centers.centers_of(train.features)
    return np.asarray(centers, dtype=np.float64)


def explicit_W(train: Dataset, centers, factors: PreconditionerFactors, kernel: KernelSpec, lam,
               cap=DENSE_CAP) -> np.ndarray:
    """Dense ``W = B^T (K_nM^T K_nM + lam n K_MM) B`` (symmetrized)."""
    C = _centers_array(train, centers)
    _check_cap(C.shape[0], cap, "explicit_W")
    Knm = KernelOperator(train.features, C, kernel).dense()
    K_MM = kernel_square(kernel, C)
    B = dense_B(factors)
    KB = Knm @ B
    W = KB.T @ KB + lam * train.n * (B.T @ K_MM @ B)
    return 0.5 * (W + W.T)


def condition_number_W(train: Dataset, centers, factors: PreconditionerFactors, kernel: KernelSpec, lam,
                       cap=DENSE_CAP) -> float:
    """Ratio of the extreme eigenvalues of the explicit ``W``."""
    ev = sla.eigvalsh(explicit_W(train, centers, factors, kernel, lam, cap))
    if ev[0] <= 0:
        return math.inf
    return float(ev[-1] / ev[0])


def effective_dimension(K_nn, lam, cap=DENSE_CAP) -> float:
    """``tr(K (K + lam n I)^{-1})`` from a Cholesky solve."""
    K = np.asarray(K_nn, dtype=np.float64)
    n = K.shape[0]
    _check_cap(n, cap, "effective_dimension")
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    S = K + lam * n * np.eye(n)
    return float(np.trace(sla.cho_solve(sla.cho_factor(S), K)))


def n_infinity_empirical(K_nn, lam, cap=DENSE_CAP) -> float:
    """In-sample proxy ``n * max_i l_i(lam)`` for the leverage supremum."""
    K = np.asarray(K_nn, dtype=np.float64)
    _check_cap(K.shape[0], cap, "n_infinity_empirical")
    return float(K.shape[0] * exact_leverage_scores(K, lam, cap=None).scores.max())


def _check_positive(**kw):
    for name, v in kw.items():
        if not (v > 0 and math.isfinite(v)):
            raise ValueError(f"{name} must be positive and finite, got {v}")


def suggested_M_uniform(lam, kappa_sq, delta) -> int:
    """Centers sufficient for uniform sampling: ``5 (1 + 14 k^2/lam) log(8 k^2 / (lam delta))``, rounded up."""
    _check_positive(lam=lam, kappa_sq=kappa_sq, delta=delta)
    if delta > 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    return int(math.ceil(5.0 * (1.0 + 14.0 * kappa_sq / lam) * math.log(8.0 * kappa_sq / (lam * delta))))


def suggested_M_leverage(lam, eff_dim, q_factor, delta, kappa_sq=1.0) -> int:
    """Centers sufficient for q-approximate leverage sampling: ``215 (2 + q^2 N) log(8 k^2 / (lam delta))``."""
    _check_positive(lam=lam, q_factor=q_factor, delta=delta, kappa_sq=kappa_sq)
    if eff_dim < 0:
        raise ValueError(f"effective dimension must be nonnegative, got {eff_dim}")
    if delta > 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    return int(math.ceil(215.0 * (2.0 + q_factor**2 * eff_dim) * math.log(8.0 * kappa_sq / (lam * delta))))


def cg_exponent(cond) -> float:
    """``log((sqrt(c) + 1) / (sqrt(c) - 1))``; infinite for ``c == 1``."""
    if cond < 1:
        raise ValueError(f"condition number must be >= 1, got {cond}")
    s = math.sqrt(cond)
    return math.inf if s == 1.0 else math.log((s + 1.0) / (s - 1.0))


@dataclass
class TheoryReport:
    cond_W: float
    cg_exponent: float
    eff_dim: float
    n_inf_emp: float
    kappa_sq: float
    suggested_M_uniform: int
    suggested_M_leverage: int

    def to_text(self):
        return "".join(f"{k} = {v!r}\n" for k, v in asdict(self).items())


def theory_report(train: Dataset, centers, factors: PreconditionerFactors, kernel: KernelSpec, lam,
                  delta=0.1, q_factor=1.0, cap=DENSE_CAP) -> TheoryReport:
    """Collect the dense diagnostics for one trained problem."""
    cond = condition_number_W(train, centers, factors, kernel, lam, cap)
    K_nn = kernel_square(kernel, train.features) if train.n <= cap else None
    if K_nn is None:
        raise ValueError(f"theory report needs n <= {cap}, got n={train.n}")
    kappa_sq = float(np.max(kernel_diag(kernel, train.features)))
    eff = effective_dimension(K_nn, lam, cap)
    return TheoryReport(
        cond_W=cond,
        cg_exponent=cg_exponent(max(cond, 1.0)),
        eff_dim=eff,
        n_inf_emp=n_infinity_empirical(K_nn, lam, cap),
        kappa_sq=kappa_sq,
        suggested_M_uniform=suggested_M_uniform(lam, kappa_sq, delta),
        suggested_M_leverage=suggested_M_leverage(lam, eff, q_factor, delta, kappa_sq),
    )
