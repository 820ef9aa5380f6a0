"""Evaluation metrics: MSE/RMSE/relative error, classification error, AUC.

Relative error is ``RMSE / mean(y)``; ``relative="norm"`` gives
``|yhat - y| / |y|`` instead.
"""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

__all__ = ["EvalReport", "regression_metrics", "classification_error", "auc", "evaluate"]


@dataclass
class EvalReport:
    n_test: int
    mse: float | None = None
    rmse: float | None = None
    relative_error: float | None = None
    c_err: float | None = None
    auc: float | None = None

    def as_dict(self):
        return asdict(self)

    def to_csv_row(self, header=True):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = self.as_dict()
        if header:
            w.writerow(d.keys())
        w.writerow(["" if v is None else repr(v) for v in d.values()])
        return buf.getvalue()

    def to_table(self):
        rows = [(k, "-" if v is None else f"{v:.6g}") for k, v in self.as_dict().items()]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows) + "\n"


def _pair(y, yhat):
    y = np.asarray(y, dtype=np.float64).ravel()
    yhat = np.asarray(yhat, dtype=np.float64).ravel()
    if y.shape != yhat.shape:
        raise ValueError(f"length mismatch: {y.size} labels vs {yhat.size} predictions")
    if y.size == 0:
        raise ValueError("empty input")
    return y, yhat


def regression_metrics(y, yhat, relative="mean") -> dict:
    """``{"mse", "rmse", "relative_error"}``; relative error is ``None`` when undefined."""
    y, yhat = _pair(y, yhat)
    mse = float(np.mean((yhat - y) ** 2))
    rmse = float(np.sqrt(mse))
    if relative == "mean":
        m = float(np.mean(y))
        rel = rmse / m if m != 0 else None
    elif relative == "norm":
        ny = float(np.linalg.norm(y))
        rel = float(np.linalg.norm(yhat - y)) / ny if ny != 0 else None
    else:
        raise ValueError(f"relative must be 'mean' or 'norm', got {relative!r}")
    return {"mse": mse, "rmse": rmse, "relative_error": rel}


def classification_error(y, scores) -> float:
    """Fraction of misclassified points.

    Binary: ``y`` in ``{-1, +1}`` and ``scores`` a vector; a score of exactly
    0 predicts +1. Multiclass: ``y`` holds class ids and ``scores`` is
    ``(n, k)``; the prediction is the argmax column.
    """
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y)
    if y.size == 0:
        raise ValueError("empty input")
    if scores.ndim == 2 and scores.shape[1] > 1:
        if scores.shape[0] != y.shape[0]:
            raise ValueError("length mismatch")
        return float(np.mean(np.argmax(scores, axis=1) != y.astype(np.int64)))
    y, s = _pair(y, scores)
    pred = np.where(s >= 0, 1.0, -1.0)
    return float(np.mean(pred != y))


def auc(y, scores) -> float:
    """Area under the ROC curve from the rank-sum statistic; ties count 1/2."""
    y, s = _pair(y, scores)
    pos = y > 0
    n_pos = int(pos.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both positive and negative labels")
    ranks = rankdata(s)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def evaluate(y, pred, task="regression", relative="mean") -> EvalReport:
    """Metrics appropriate for ``task`` (``regression``, ``binary`` or ``multiclass``)."""
    y = np.asarray(y)
    if task == "regression":
        return EvalReport(n_test=len(y), **regression_metrics(y, pred, relative))
    if task == "binary":
        return EvalReport(n_test=len(y), c_err=classification_error(y, pred), auc=auc(y, pred))
    if task == "multiclass":
        return EvalReport(n_test=len(y), c_err=classification_error(y, pred))
    raise ValueError(f"unknown task {task!r}")
