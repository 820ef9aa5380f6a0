"""Synthetic datasets bundled for tests, demos and the command line.

Targets are kernel expansions over random anchor points, so they lie in the
span of the kernel, plus Gaussian noise.
"""
from __future__ import annotations

import numpy as np

from ._random import make_rng
from .data import Dataset
from .kernels import KernelSpec, kernel_block

__all__ = ["make_regression", "make_classification", "make_ill_conditioned", "GENERATORS"]


def make_regression(n=1000, d=5, sigma=1.0, n_anchors=20, noise=0.1, seed=0) -> Dataset:
    """``y = sum_j w_j K(x, a_j) + noise`` with a Gaussian kernel of width ``sigma``."""
    rng = make_rng(seed)
    X = rng.standard_normal((n, d))
    anchors = rng.standard_normal((n_anchors, d))
    w = rng.standard_normal(n_anchors)
    y = kernel_block(KernelSpec.gaussian(sigma), X, anchors) @ w
    return Dataset(X, y + noise * rng.standard_normal(n))


def make_classification(n=1000, d=5, sigma=1.0, n_anchors=20, flip=0.05, seed=0) -> Dataset:
    """Labels in ``{-1, +1}`` from the sign of a kernel expansion, with a fraction flipped."""
    ds = make_regression(n, d, sigma, n_anchors, noise=0.0, seed=seed)
    rng = make_rng(seed + 1)
    y = np.where(ds.labels >= 0, 1.0, -1.0)
    y[rng.random(n) < flip] *= -1
    return Dataset(ds.features, y)


def make_ill_conditioned(n=1000, d=3, noise=0.05, seed=0) -> Dataset:
    """Smooth target on a small cube, so that Gaussian kernel matrices are badly conditioned.

    Points are uniform on ``[-1, 1]^d``. With a kernel width of 1 or more the
    spectrum of ``K_nn`` spans many orders of magnitude and unpreconditioned
    iterations are slow.
    """
    rng = make_rng(seed)
    X = rng.uniform(-1.0, 1.0, (n, d))
    y = np.sin(3.0 * X[:, 0]) + X[:, 1] ** 2 - 0.5 * X[:, -1]
    return Dataset(X, y + noise * rng.standard_normal(n))


GENERATORS = {
    "regression": make_regression,
    "classification": make_classification,
    "ill_conditioned": make_ill_conditioned,
}
