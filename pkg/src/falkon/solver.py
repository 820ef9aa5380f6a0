"""FALKON training, prediction and model files.

Training solves the preconditioned Nystrom system

    W beta = b,    W = B^T (K_nM^T K_nM + lam n K_MM) B,    b = B^T K_nM^T y,

with a fixed number of conjugate gradient steps and returns ``alpha = B beta``.
Internally ``B`` is applied without its ``1/sqrt(n)`` factor and the data term
is divided by ``n`` instead, which yields the same iterates for ``alpha``.
``K_nM`` is never stored: every product streams over row blocks of at most
``block_rows`` rows.

Model file layout (all integers little-endian)::

    offset 0   8 bytes   magic b"FALKONM\\0"
    offset 8   uint32    format version (currently 1)
    offset 12  uint32    header length h in bytes
    offset 16  h bytes   UTF-8 JSON header: {"kernel": {...},
                         "centers_shape": [M, d], "alpha_shape": [M] or [M, k],
                         "has_norm_stats": bool, optional "offset": [...]}
    then                 centers, alpha, and (if present) mean and std of the
                         feature normalization, each as little-endian float64
                         in C order, back to back.
"""
from __future__ import annotations

import json
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ._random import make_rng
from .data import Dataset, NormStats, zscore_apply
from .kernels import KernelSpec, kernel_block, kernel_square
from .linalg import DivergenceError, conjugate_gradient, tri_solve
from .preconditioner import (
    PreconditionerFactors,
    apply_B_unscaled,
    apply_Bt_unscaled,
    build_preconditioner,
)
from .sampling import (
    CenterSelection,
    LeverageScores,
    exact_leverage_scores,
    load_scores_file,
    sample_leverage,
    sample_uniform,
)

__all__ = [
    "FalkonConfig",
    "FalkonModel",
    "RunReport",
    "ModelFormatError",
    "KernelOperator",
    "knm_times_vector",
    "select_centers",
    "falkon_train",
    "falkon_train_basic_gradient",
    "falkon_predict",
    "save_model",
    "load_model",
]


@dataclass
class FalkonConfig:
    """Hyperparameters of a FALKON run.

    ``sampling`` is ``"uniform"`` or ``"leverage"``. Leverage sampling uses
    ``scores`` (an array, :class:`LeverageScores` or a path to a scores file)
    when given, and otherwise exact scores at ``lambda_ls`` (default ``lam``).
    ``block_rows`` defaults to ``M``.
    """

    kernel: KernelSpec
    lam: float
    M: int
    t: int
    sampling: str = "uniform"
    scores: object = None
    lambda_ls: float | None = None
    q_factor: float | None = None
    seed: int = 0
    block_rows: int | None = None
    backend: str = "auto"
    tol: float | None = None
    threads: int = 1

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if self.M < 1:
            raise ValueError(f"M must be >= 1, got {self.M}")
        if self.t < 1:
            raise ValueError(f"t must be >= 1, got {self.t}")
        if self.sampling not in ("uniform", "leverage"):
            raise ValueError(f"sampling must be 'uniform' or 'leverage', got {self.sampling!r}")
        if self.block_rows is not None and self.block_rows < 1:
            raise ValueError("block_rows must be >= 1")


@dataclass(frozen=True)
class FalkonModel:
    """``f(x) = offset + sum_j alpha_j K(x, c_j)``; ``alpha`` is ``(M,)`` or ``(M, k)``.

    ``offset`` is the training label mean when labels were centered, else 0.
    """

    centers: np.ndarray
    alpha: np.ndarray
    kernel: KernelSpec
    norm_stats: NormStats | None = None
    offset: float | np.ndarray = 0.0
    info: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=np.float64)
        centers = np.asarray(self.centers, dtype=np.float64)
        if centers.ndim != 2 or alpha.shape[0] != centers.shape[0]:
            raise ValueError(
                f"{centers.shape[0] if centers.ndim == 2 else '?'} centers but alpha has shape {alpha.shape}"
            )
        if not np.all(np.isfinite(alpha)):
            raise ValueError("alpha contains NaN or Inf")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "centers", centers)


@dataclass
class RunReport:
    """What happened during training."""

    selection: CenterSelection
    factors: PreconditionerFactors | None
    iterations: int
    seconds_setup: float = 0.0
    seconds_iter: list = field(default_factory=list)
    tau: float | None = None


class KernelOperator:
    """Streams products with ``K_nM`` over fixed row blocks.

    Blocks are ``[0, b), [b, 2b), ...`` with ``b = block_rows``. With
    ``threads > 1`` blocks are evaluated by a thread pool, but partial results
    are always summed in block order so the result does not depend on the
    thread count.
    """

    def __init__(self, X, centers, kernel: KernelSpec, block_rows=None, threads=1):
        self.X = X
        self.centers = np.asarray(centers, dtype=np.float64)
        self.kernel = kernel
        self.n = X.shape[0]
        self.M = self.centers.shape[0]
        if X.shape[1] != self.centers.shape[1]:
            raise ValueError(f"data has {X.shape[1]} features, centers have {self.centers.shape[1]}")
        self.block_rows = int(block_rows or self.M)
        self.threads = max(1, int(threads))
        self.bounds = [(lo, min(lo + self.block_rows, self.n)) for lo in range(0, self.n, self.block_rows)]

    def _block(self, lo, hi):
        return kernel_block(self.kernel, self.X[lo:hi], self.centers)

    def _map(self, fn):
        if self.threads == 1 or len(self.bounds) == 1:
            return [fn(lo, hi) for lo, hi in self.bounds]
        with ThreadPoolExecutor(self.threads) as pool:
            return list(pool.map(lambda b: fn(*b), self.bounds))

    @staticmethod
    def _sum(parts):
        out = parts[0].copy()
        for p in parts[1:]:
            out += p
        return out

    def knm_t_knm(self, u, v=None):
        """``K_nM^T (K_nM u + v)``; ``v`` may be ``None`` for zero."""
        u = np.asarray(u, dtype=np.float64)

        def part(lo, hi):
            Kr = self._block(lo, hi)
            w = Kr @ u
            if v is not None:
                w = w + v[lo:hi]
            return Kr.T @ w

        return self._sum(self._map(part))

    def knm_t(self, v):
        """``K_nM^T v``."""
        return self._sum(self._map(lambda lo, hi: self._block(lo, hi).T @ v[lo:hi]))

    def knm(self, u):
        """``K_nM u``."""
        return np.concatenate(self._map(lambda lo, hi: self._block(lo, hi) @ u), axis=0)

    def dense(self):
        """The full ``n x M`` matrix (desk-scale diagnostics only)."""
        return np.concatenate(self._map(self._block), axis=0)


def knm_times_vector(X, centers, kernel, u, v=None, block_rows=None, threads=1):
    """``K_nM^T (K_nM u + v)`` accumulated over row blocks of ``X``."""
    if isinstance(X, Dataset):
        X = X.features
    return KernelOperator(X, centers, kernel, block_rows, threads).knm_t_knm(u, v)


def _resolve_scores(config: FalkonConfig, train: Dataset):
    scores = config.scores
    if scores is None:
        lam_ls = config.lambda_ls if config.lambda_ls is not None else config.lam
        K_nn = kernel_square(config.kernel, train.features)
        return exact_leverage_scores(K_nn, lam_ls)
    if isinstance(scores, LeverageScores):
        return scores
    if isinstance(scores, (str, bytes)) or hasattr(scores, "__fspath__"):
        return load_scores_file(scores, train.n)
    return LeverageScores(np.asarray(scores, dtype=np.float64))


def select_centers(train: Dataset, config: FalkonConfig) -> CenterSelection:
    """Pick centers according to ``config.sampling`` and ``config.seed``."""
    if config.M > train.n:
        raise ValueError(f"M={config.M} exceeds the number of training points n={train.n}")
    if config.sampling == "uniform":
        return sample_uniform(train.n, config.M, config.seed)
    scores = _resolve_scores(config, train)
    return sample_leverage(scores, config.M, train.n, config.seed, q_factor=config.q_factor)


class _Problem:
    """Centers, factors and the preconditioned operator shared by the trainers."""

    def __init__(self, train: Dataset, config: FalkonConfig, selection: CenterSelection | None):
        t0 = time.perf_counter()
        self.config = config
        self.selection = selection if selection is not None else select_centers(train, config)
        self.centers = self.selection.centers_of(train.features)
        self.op = KernelOperator(train.features, self.centers, config.kernel, config.block_rows, config.threads)
        self.n = train.n
        K_MM = kernel_square(config.kernel, self.centers)
        D = None if self.selection.is_uniform else self.selection.d_diag
        self.F = build_preconditioner(K_MM, config.lam, self.n, D=D, backend=config.backend)
        Y = train.labels
        self.Y = Y[:, None] if Y.ndim == 1 else Y
        self.multi = Y.ndim == 2
        self.seconds_setup = time.perf_counter() - t0

    def apply_W(self, u):
        """``W u`` via the factor shortcut ``B'^T K_MM B' = A^{-T} A^{-1}``."""
        F = self.F
        data = apply_Bt_unscaled(F, self.op.knm_t_knm(apply_B_unscaled(F, u)) / self.n)
        return data + self.config.lam * tri_solve(F.A, tri_solve(F.A, u), transpose=True)

    def rhs(self, y):
        return apply_Bt_unscaled(self.F, self.op.knm_t(y / self.n))

    def alpha(self, beta):
        return apply_B_unscaled(self.F, beta)

    def pack(self, alphas):
        A = np.column_stack(alphas)
        return A if self.multi else A[:, 0]


def falkon_train(train: Dataset, config: FalkonConfig, centers: CenterSelection | None = None, callback=None):
    """Fit FALKON; returns ``(model, report)``.

    ``centers`` overrides the sampling in ``config``. ``callback(k, alpha_k)``
    is invoked after every conjugate gradient step (single-output labels only).
    For ``(n, k)`` label matrices the factorization is shared and conjugate
    gradient runs once per column.
    """
    prob = _Problem(train, config, centers)
    times = []
    t_start = time.perf_counter()

    def on_step(k, beta):
        times.append(time.perf_counter() - t_start)
        if callback is not None and not prob.multi:
            callback(k, prob.alpha(beta))

    alphas = []
    for j in range(prob.Y.shape[1]):
        beta = conjugate_gradient(prob.apply_W, prob.rhs(prob.Y[:, j]), config.t, tol=config.tol, callback=on_step)
        alphas.append(prob.alpha(beta))
    model = FalkonModel(prob.centers, prob.pack(alphas), config.kernel)
    report = RunReport(prob.selection, prob.F, config.t, prob.seconds_setup, times)
    return model, report


def _power_lambda_max(apply_op, dim, iters=20, seed=0):
    v = make_rng(seed).standard_normal(dim)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = apply_op(v)
        lam = float(v @ w)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        v = w / nrm
    return lam


def falkon_train_basic_gradient(
    train: Dataset, config: FalkonConfig, tau=None, centers: CenterSelection | None = None, callback=None
):
    """Preconditioned gradient descent

        beta_k = beta_{k-1} - (tau / n) (W beta_{k-1} - b),    beta_0 = 0,

    run for ``config.t`` steps. ``tau`` defaults to ``n / lambda_max(W)``
    (20 power iterations), i.e. a step of ``1 / lambda_max(W)``.
    Returns ``(model, report)``.
    """
    prob = _Problem(train, config, centers)
    n = prob.n
    sqrt_n = np.sqrt(n)
    if tau is None:
        tau = n / _power_lambda_max(prob.apply_W, prob.F.q, seed=config.seed)
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    times = []
    t_start = time.perf_counter()
    alphas = []
    for j in range(prob.Y.shape[1]):
        b = sqrt_n * prob.rhs(prob.Y[:, j])
        beta = np.zeros(prob.F.q)
        for k in range(1, config.t + 1):
            beta = beta - (tau / n) * (prob.apply_W(beta) - b)
            if not np.all(np.isfinite(beta)):
                raise DivergenceError(k)
            times.append(time.perf_counter() - t_start)
            if callback is not None and not prob.multi:
                callback(k, prob.alpha(beta) / sqrt_n)
        alphas.append(prob.alpha(beta) / sqrt_n)
    model = FalkonModel(prob.centers, prob.pack(alphas), config.kernel)
    report = RunReport(prob.selection, prob.F, config.t, prob.seconds_setup, times, tau=float(tau))
    return model, report


def falkon_predict(model: FalkonModel, X, block_rows=None) -> np.ndarray:
    """Predictions ``K(X, centers) @ alpha``, evaluated in row blocks.

    If the model carries normalization statistics, ``X`` is taken to be raw
    features and is normalized first.
    """
    if isinstance(X, Dataset):
        X = X.features
    if not sp.issparse(X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
    if X.shape[1] != model.centers.shape[1]:
        raise ValueError(f"X has {X.shape[1]} features, model expects {model.centers.shape[1]}")
    if model.norm_stats is not None:
        X = zscore_apply(Dataset(X, np.zeros(X.shape[0])), model.norm_stats).features
    op = KernelOperator(X, model.centers, model.kernel, block_rows or max(model.centers.shape[0], 1))
    return op.knm(model.alpha) + model.offset


class ModelFormatError(ValueError):
    """A model file is corrupt or from an unsupported format version."""


_MAGIC = b"FALKONM\x00"
_VERSION = 1


def save_model(model: FalkonModel, path):
    has_norm = model.norm_stats is not None
    header = {
        "kernel": model.kernel.to_dict(),
        "centers_shape": list(model.centers.shape),
        "alpha_shape": list(model.alpha.shape),
        "has_norm_stats": has_norm,
    }
    if np.any(np.asarray(model.offset) != 0):
        header["offset"] = np.atleast_1d(np.asarray(model.offset, dtype=np.float64)).tolist()
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    arrays = [model.centers, model.alpha]
    if has_norm:
        arrays += [model.norm_stats.mean, model.norm_stats.std]
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(hbytes)))
        fh.write(hbytes)
        for a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_model(path) -> FalkonModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != _MAGIC:
        raise ModelFormatError(f"{path}: not a FALKON model file (bad magic header)")
    if len(blob) < 16:
        raise ModelFormatError(f"{path}: truncated header")
    version, hlen = struct.unpack("<II", blob[8:16])
    if version != _VERSION:
        raise ModelFormatError(f"{path}: unsupported model format version {version} (expected {_VERSION})")
    try:
        header = json.loads(blob[16 : 16 + hlen].decode("utf-8"))
        kernel = KernelSpec.from_dict(header["kernel"])
        shapes = [tuple(header["centers_shape"]), tuple(header["alpha_shape"])]
        offset = header.get("offset", 0.0)
        if isinstance(offset, list):
            offset = np.array(offset, dtype=np.float64)
            if len(shapes[1]) == 1:
                offset = float(offset[0])
        if header["has_norm_stats"]:
            d = shapes[0][1]
            shapes += [(d,), (d,)]
    except (ValueError, KeyError, TypeError, IndexError) as exc:
        raise ModelFormatError(f"{path}: corrupt header ({exc})") from None
    pos = 16 + hlen
    arrays = []
    for shape in shapes:
        size = int(np.prod(shape)) * 8
        if pos + size > len(blob):
            raise ModelFormatError(f"{path}: truncated data")
        arrays.append(np.frombuffer(blob, dtype="<f8", count=size // 8, offset=pos).reshape(shape).astype(np.float64))
        pos += size
    if pos != len(blob):
        raise ModelFormatError(f"{path}: {len(blob) - pos} trailing bytes")
    norm = NormStats(arrays[2], arrays[3]) if len(arrays) == 4 else None
    return FalkonModel(arrays[0], arrays[1], kernel, norm, offset)
