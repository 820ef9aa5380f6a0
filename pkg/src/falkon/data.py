"""Datasets: containers, text loaders, z-score normalization and splitting.

Two on-disk formats are supported.

Dense CSV
    One sample per line, fields separated by ``,``. Every line has the same
    number of fields; one column (the last one by default) holds the label.
    An optional first header line can be skipped. Blank lines are ignored.
    Values are written with ``repr`` so that a write/read round trip is exact.

Sparse index:value
    One sample per line: ``label idx:val idx:val ...`` separated by single
    spaces or tabs. Indices are 1-based and strictly increasing inside a line.
    Missing entries are zero. The number of features is the largest index
    seen unless given explicitly.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ._random import make_rng

__all__ = [
    "Dataset",
    "DatasetFormatError",
    "NormStats",
    "load_dense_csv",
    "load_sparse_index_value",
    "write_dense_csv",
    "write_sparse_index_value",
    "zscore_fit",
    "zscore_apply",
    "split_train_test",
]


class DatasetFormatError(ValueError):
    """Raised when a data file cannot be parsed."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f"{':' if where else 'line '}{line}"
        super().__init__(f"{where}: {message}" if where else message)


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus label vector.

    ``features`` is either a dense ``(n, d)`` float array or a CSR matrix with
    sorted column indices. ``labels`` has length ``n``; it may also be a
    ``(n, k)`` matrix of one-vs-rest targets.
    """

    features: np.ndarray | sp.csr_matrix
    labels: np.ndarray

    def __post_init__(self):
        X = self.features
        if sp.issparse(X):
            X = sp.csr_matrix(X, dtype=np.float64)
            if not X.has_sorted_indices:
                X = X.sorted_indices()
            if not np.all(np.isfinite(X.data)):
                raise ValueError("features contain NaN or Inf")
        else:
            X = np.asarray(X, dtype=np.float64)
            if X.ndim == 1:
                X = X[:, None]
            if X.ndim != 2:
                raise ValueError("features must be a 2-d array")
            if not np.all(np.isfinite(X)):
                raise ValueError("features contain NaN or Inf")
        y = np.asarray(self.labels, dtype=np.float64)
        if y.shape[0] != X.shape[0]:
            raise ValueError(
                f"labels length {y.shape[0]} does not match {X.shape[0]} feature rows"
            )
        if not np.all(np.isfinite(y)):
            raise ValueError("labels contain NaN or Inf")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.features)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.intp)
        return Dataset(self.features[idx], self.labels[idx])


@dataclass(frozen=True)
class NormStats:
    """Per-feature training mean and standard deviation."""

    mean: np.ndarray
    std: np.ndarray = field(repr=False)


def _parse_float(token, lineno, path):
    try:
        value = float(token)
    except ValueError:
        raise DatasetFormatError(f"non-numeric field {token!r}", lineno, path) from None
    if not math.isfinite(value):
        raise DatasetFormatError(f"non-finite field {token!r}", lineno, path)
    return value


def load_dense_csv(path, label_column=-1, skip_header=False) -> Dataset:
    """Read a comma-separated file of numeric rows.

    Parameters
    ----------
    path : str or Path
    label_column : int
        Column holding the label; negative values count from the end.
    skip_header : bool
        Ignore the first line.
    """
    rows = []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, fields in enumerate(reader, start=1):
            if skip_header and lineno == 1:
                continue
            if not fields or all(not f.strip() for f in fields):
                continue
            if width is None:
                width = len(fields)
                if width < 2:
                    raise DatasetFormatError("need at least one feature and a label", lineno, path)
            elif len(fields) != width:
                raise DatasetFormatError(
                    f"expected {width} fields, found {len(fields)}", lineno, path
                )
            rows.append([_parse_float(f.strip(), lineno, path) for f in fields])
    if not rows:
        raise DatasetFormatError("no rows", path=path)
    table = np.array(rows, dtype=np.float64)
    if not -width <= label_column < width:
        raise ValueError(f"label_column {label_column} out of range for {width} fields")
    col = label_column % width
    labels = table[:, col]
    features = np.delete(table, col, axis=1)
    return Dataset(features, labels)


def load_sparse_index_value(path, n_features=None) -> Dataset:
    """Read the ``label idx:val ...`` sparse text format (1-based indices)."""
    labels = []
    indptr = [0]
    indices = []
    values = []
    max_index = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            labels.append(_parse_float(tokens[0], lineno, path))
            prev = 0
            for tok in tokens[1:]:
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise DatasetFormatError(f"malformed pair {tok!r}", lineno, path)
                try:
                    idx = int(idx_s)
                except ValueError:
                    raise DatasetFormatError(f"non-integer index {idx_s!r}", lineno, path) from None
                if idx < 1:
                    raise DatasetFormatError(f"index {idx} < 1", lineno, path)
                if idx <= prev:
                    raise DatasetFormatError("indices not ascending", lineno, path)
                prev = idx
                indices.append(idx - 1)
                values.append(_parse_float(val_s, lineno, path))
            max_index = max(max_index, prev)
            indptr.append(len(indices))
    if not labels:
        raise DatasetFormatError("no rows", path=path)
    d = max_index if n_features is None else int(n_features)
    if d < max_index:
        raise DatasetFormatError(f"index {max_index} exceeds n_features={d}", path=path)
    X = sp.csr_matrix(
        (np.array(values, dtype=np.float64), np.array(indices, dtype=np.int64), np.array(indptr)),
        shape=(len(labels), max(d, 1)),
    )
    return Dataset(X, np.array(labels))


def write_dense_csv(ds: Dataset, path):
    """Write ``ds`` as CSV with the label in the last column."""
    X = ds.features.toarray() if ds.is_sparse else ds.features
    with open(path, "w") as fh:
        for row, label in zip(X, ds.labels):
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write(f",{float(label)!r}\n")


def write_sparse_index_value(ds: Dataset, path):
    """Write ``ds`` in the sparse text format; explicit zeros are dropped."""
    X = sp.csr_matrix(ds.features)
    X.eliminate_zeros()
    X.sort_indices()
    with open(path, "w") as fh:
        for i, label in enumerate(ds.labels):
            lo, hi = X.indptr[i], X.indptr[i + 1]
            pairs = (f"{j + 1}:{float(v)!r}" for j, v in zip(X.indices[lo:hi], X.data[lo:hi]))
            fh.write(" ".join([repr(float(label)), *pairs]) + "\n")


def zscore_fit(train: Dataset) -> NormStats:
    """Mean and sample standard deviation (``ddof=1``) of each feature.

    Constant features get a standard deviation of 1 so that they map to 0.
    """
    if train.n == 0:
        raise ValueError("cannot fit normalization on an empty dataset")
    X = train.features.toarray() if train.is_sparse else train.features
    mean = X.mean(axis=0)
    std = X.std(axis=0, ddof=1) if train.n > 1 else np.zeros(train.d)
    # test constancy exactly: the computed mean of a constant column can be off by an ulp
    const = X.max(axis=0) == X.min(axis=0)
    mean = np.where(const, X[0], mean)
    std = np.where(const | (std == 0), 1.0, std)
    return NormStats(mean=mean, std=std)


def zscore_apply(ds: Dataset, stats: NormStats) -> Dataset:
    X = ds.features.toarray() if ds.is_sparse else ds.features
    if X.shape[1] != stats.mean.shape[0]:
        raise ValueError(f"dataset has {X.shape[1]} features, stats have {stats.mean.shape[0]}")
    return Dataset((X - stats.mean) / stats.std, ds.labels)


def split_train_test(ds: Dataset, test_fraction=0.2, seed=0):
    """Shuffle rows with a seeded generator and cut off ``round(test_fraction * n)``.

    Returns ``(train, test)``.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    if ds.n < 2:
        raise ValueError("need at least two rows to split")
    n_test = int(math.floor(test_fraction * ds.n + 0.5))
    perm = make_rng(seed).permutation(ds.n)
    return ds.subset(np.sort(perm[n_test:])), ds.subset(np.sort(perm[:n_test]))
