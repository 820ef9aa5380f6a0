"""Choosing Nystrom centers: uniform subsets and leverage-score sampling.

Leverage-score sampling draws ``M`` indices with replacement and collapses
them into distinct indices with multiplicities. Each kept center ``j`` gets
the reweighting ``d_j = sqrt(1 / (n * p_j * count_j))``; uniform sampling
uses ``d_j = 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from ._random import make_rng

__all__ = [
    "CenterSelection",
    "LeverageScores",
    "sample_uniform",
    "exact_leverage_scores",
    "multinomial_counts",
    "sample_leverage",
    "load_scores_file",
    "EXACT_LEVERAGE_CAP",
]

EXACT_LEVERAGE_CAP = 5000


@dataclass(frozen=True)
class CenterSelection:
    """Indices of the kept centers with their multiplicities and weights.

    ``scheme`` is ``"uniform"`` or ``"leverage"``; for the latter ``lam`` and
    ``q_factor`` record how the scores were produced (``None`` if unknown).
    ``probs`` holds the sampling probability of each kept center.
    """

    source_indices: np.ndarray
    counts: np.ndarray
    d_diag: np.ndarray
    scheme: str = "uniform"
    lam: float | None = None
    q_factor: float | None = None
    probs: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        idx = np.asarray(self.source_indices, dtype=np.int64)
        counts = np.asarray(self.counts, dtype=np.int64)
        d = np.asarray(self.d_diag, dtype=np.float64)
        if not (idx.shape == counts.shape == d.shape) or idx.ndim != 1:
            raise ValueError("source_indices, counts and d_diag must be 1-d and equally long")
        if np.any(counts < 1):
            raise ValueError("counts must be >= 1")
        if not (np.all(d > 0) and np.all(np.isfinite(d))):
            raise ValueError("d_diag must be strictly positive and finite")
        object.__setattr__(self, "source_indices", idx)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "d_diag", d)

    @property
    def M(self) -> int:
        """Number of kept (distinct) centers."""
        return int(self.source_indices.shape[0])

    @property
    def n_draws(self) -> int:
        return int(self.counts.sum())

    @property
    def is_uniform(self) -> bool:
        return self.scheme == "uniform"

    def centers_of(self, features) -> np.ndarray:
        """Rows of ``features`` at the kept indices, as a dense array."""
        C = features[self.source_indices]
        return C.toarray() if sp.issparse(C) else np.array(C, dtype=np.float64)

    @classmethod
    def from_indices(cls, indices) -> "CenterSelection":
        """Uniform-style selection of explicitly given rows (``D = I``)."""
        idx = np.asarray(indices, dtype=np.int64)
        return cls(idx, np.ones_like(idx), np.ones(idx.shape[0]), scheme="uniform")


@dataclass(frozen=True)
class LeverageScores:
    scores: np.ndarray
    lam: float | None = None


def sample_uniform(n, M, seed=0) -> CenterSelection:
    """``M`` distinct indices drawn uniformly without replacement from ``range(n)``."""
    if not 1 <= M <= n:
        raise ValueError(f"need 1 <= M <= n, got M={M}, n={n}")
    idx = make_rng(seed).choice(n, size=M, replace=False)
    return CenterSelection.from_indices(idx)


def exact_leverage_scores(K_nn, lam, cap=EXACT_LEVERAGE_CAP) -> LeverageScores:
    """Diagonal of ``K (K + lam n I)^{-1}`` from a symmetric eigendecomposition."""
    K = np.asarray(K_nn, dtype=np.float64)
    n = K.shape[0]
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if cap is not None and n > cap:
        raise ValueError(f"exact leverage scores are O(n^3); n={n} exceeds the cap of {cap}")
    evals, U = sla.eigh(0.5 * (K + K.T))
    evals = np.maximum(evals, 0.0)
    shrink = evals / (evals + lam * n)
    scores = (U * U) @ shrink
    return LeverageScores(scores=scores, lam=float(lam))


def multinomial_counts(M, probs, seed=0):
    """Draw ``M`` indices with replacement; return ``(unique_indices, counts)``.

    Each draw is a uniform number located in the cumulative distribution of
    ``probs``, so zero-probability indices can never be selected.
    """
    p = np.asarray(probs, dtype=np.float64).ravel()
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("probabilities must be finite and nonnegative")
    total = p.sum()
    if total <= 0:
        raise ValueError("all probabilities are zero")
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {total!r}, not 1")
    edges = np.cumsum(p)
    u = make_rng(seed).random(M) * edges[-1]
    draws = np.searchsorted(edges, u, side="right")
    # rounding in the cumulative sum can push a draw past the last bin
    draws = np.minimum(draws, np.flatnonzero(p > 0)[-1])
    counts = np.bincount(draws, minlength=p.size)
    ind = np.flatnonzero(counts)
    return ind, counts[ind]


def sample_leverage(scores, M, n=None, seed=0, q_factor=None) -> CenterSelection:
    """Sample centers with probability proportional to (approximate) leverage scores."""
    if isinstance(scores, LeverageScores):
        lam, s = scores.lam, np.asarray(scores.scores, dtype=np.float64)
    else:
        lam, s = None, np.asarray(scores, dtype=np.float64)
    n = s.size if n is None else int(n)
    if s.size != n:
        raise ValueError(f"got {s.size} scores for n={n}")
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise ValueError("leverage scores must be finite and nonnegative")
    if s.sum() <= 0:
        raise ValueError("all leverage scores are zero")
    p = s / s.sum()
    ind, counts = multinomial_counts(M, p, seed)
    pk = p[ind]
    d = np.sqrt(1.0 / (n * pk * counts))
    return CenterSelection(ind, counts, d, scheme="leverage", lam=lam, q_factor=q_factor, probs=pk)


def load_scores_file(path, n=None) -> LeverageScores:
    """One score per line; blank lines are skipped."""
    vals = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                vals.append(float(line))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: not a number: {line!r}") from None
    s = np.array(vals)
    if n is not None and s.size != n:
        raise ValueError(f"{path}: expected {n} scores, found {s.size}")
    return LeverageScores(scores=s)
