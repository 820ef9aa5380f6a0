"""Kernel functions and kernel matrices.

Gaussian kernels use the width convention ``exp(-|x - x'|^2 / (2 sigma^2))``;
the diagonal variant takes one width per feature. Squared distances are
formed as ``|x|^2 + |x'|^2 - 2 <x, x'>`` (so sparse rows cost O(nnz)) and
clamped at zero before exponentiation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = ["KernelSpec", "kernel_eval", "kernel_block", "kernel_square", "kernel_diag"]

_NAMES = ("gaussian", "gaussian_diag", "linear")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus its parameters.

    Use the constructors :meth:`gaussian`, :meth:`gaussian_diag` and
    :meth:`linear` rather than building instances by hand.
    """

    name: str
    sigma: float | None = None
    widths: tuple | None = None

    def __post_init__(self):
        if self.name not in _NAMES:
            raise ValueError(f"unknown kernel {self.name!r}; expected one of {_NAMES}")
        if self.name == "gaussian":
            if self.sigma is None or not self.sigma > 0 or not np.isfinite(self.sigma):
                raise ValueError(f"gaussian kernel needs sigma > 0, got {self.sigma}")
        if self.name == "gaussian_diag":
            w = np.asarray(self.widths, dtype=np.float64)
            if w.ndim != 1 or w.size == 0 or not np.all(w > 0) or not np.all(np.isfinite(w)):
                raise ValueError("gaussian_diag kernel needs a vector of positive widths")
            object.__setattr__(self, "widths", tuple(float(v) for v in w))

    @classmethod
    def gaussian(cls, sigma):
        return cls("gaussian", sigma=float(sigma))

    @classmethod
    def gaussian_diag(cls, widths):
        return cls("gaussian_diag", widths=tuple(np.asarray(widths, dtype=float)))

    @classmethod
    def linear(cls):
        return cls("linear")

    def to_dict(self) -> dict:
        if self.name == "gaussian":
            return {"name": "gaussian", "sigma": self.sigma}
        if self.name == "gaussian_diag":
            return {"name": "gaussian_diag", "widths": list(self.widths)}
        return {"name": "linear"}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        name = d.get("name")
        if name == "gaussian":
            return cls.gaussian(d["sigma"])
        if name == "gaussian_diag":
            return cls.gaussian_diag(d["widths"])
        if name == "linear":
            return cls.linear()
        raise ValueError(f"unknown kernel {name!r}")

    def _scale(self, d):
        """Per-feature multiplier mapping the Gaussian exponent to a plain squared distance."""
        if self.name == "gaussian":
            return np.full(d, 1.0 / (np.sqrt(2.0) * self.sigma))
        if len(self.widths) != d:
            raise ValueError(f"kernel has {len(self.widths)} widths but data has {d} features")
        return 1.0 / (np.sqrt(2.0) * np.asarray(self.widths))


def _as_2d(X):
    if sp.issparse(X):
        return sp.csr_matrix(X, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    return X[None, :] if X.ndim == 1 else X


def _scale_cols(X, s):
    if sp.issparse(X):
        return sp.csr_matrix(X @ sp.diags(s))
    return X * s


def _sq_norms(X):
    if sp.issparse(X):
        return np.asarray(X.multiply(X).sum(axis=1)).ravel()
    return np.einsum("ij,ij->i", X, X)


def _dot(X, C):
    out = X @ C.T
    if sp.issparse(out):
        out = out.toarray()
    return np.asarray(out)


def kernel_eval(spec: KernelSpec, x, xp) -> float:
    """Kernel value for two single feature rows."""
    x = np.asarray(x.toarray() if sp.issparse(x) else x, dtype=np.float64).ravel()
    xp = np.asarray(xp.toarray() if sp.issparse(xp) else xp, dtype=np.float64).ravel()
    if x.shape != xp.shape:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {xp.shape[0]}")
    if spec.name == "linear":
        return float(np.dot(x, xp))
    diff = (x - xp) * spec._scale(x.shape[0])
    return float(np.exp(-np.dot(diff, diff)))


def kernel_block(spec: KernelSpec, rows, centers) -> np.ndarray:
    """Dense ``len(rows) x len(centers)`` kernel matrix."""
    X = _as_2d(rows)
    C = _as_2d(centers)
    if X.shape[1] != C.shape[1]:
        raise ValueError(f"dimension mismatch: rows have {X.shape[1]} features, centers {C.shape[1]}")
    if spec.name == "linear":
        return _dot(X, C)
    s = spec._scale(X.shape[1])
    Xs = _scale_cols(X, s)
    Cs = _scale_cols(C, s)
    sq = _sq_norms(Xs)[:, None] + _sq_norms(Cs)[None, :] - 2.0 * _dot(Xs, Cs)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-sq, out=sq)


def kernel_square(spec: KernelSpec, centers) -> np.ndarray:
    """Symmetric ``M x M`` kernel matrix of the centers (``K_MM``)."""
    C = _as_2d(centers)
    K = kernel_block(spec, C, C)
    K = 0.5 * (K + K.T)
    if spec.name != "linear":
        np.fill_diagonal(K, 1.0)
    return K


def kernel_diag(spec: KernelSpec, rows) -> np.ndarray:
    """``K(x_i, x_i)`` for every row."""
    X = _as_2d(rows)
    if spec.name == "linear":
        return _sq_norms(X)
    return np.ones(X.shape[0])
