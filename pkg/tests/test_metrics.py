import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from falkon.metrics import EvalReport, auc, classification_error, evaluate, regression_metrics


def brute_auc(y, s):
    pos, neg = s[y > 0], s[y <= 0]
    total = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p, q in itertools.product(pos, neg))
    return total / (len(pos) * len(neg))


def test_regression_examples():
    assert regression_metrics([1.0, 2.0], [1.0, 2.0]) == {"mse": 0.0, "rmse": 0.0, "relative_error": 0.0}
    assert regression_metrics([2.0, 2.0], [1.0, 3.0]) == {"mse": 1.0, "rmse": 1.0, "relative_error": 0.5}
    r = regression_metrics([3.0, 4.0], [0.0, 0.0], relative="norm")
    assert r["relative_error"] == 1.0


def test_regression_zero_mean_and_errors():
    assert regression_metrics([-1.0, 1.0], [0.0, 0.0])["relative_error"] is None
    with pytest.raises(ValueError, match="mismatch"):
        regression_metrics([1.0], [1.0, 2.0])
    with pytest.raises(ValueError, match="empty"):
        regression_metrics([], [])
    with pytest.raises(ValueError):
        regression_metrics([1.0], [1.0], relative="max")


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=50), st.integers(0, 2**32 - 1))
def test_rmse_squared_is_mse(y, seed):
    y = np.array(y)
    yhat = y + np.random.default_rng(seed).standard_normal(y.size)
    r = regression_metrics(y, yhat)
    assert r["rmse"] ** 2 == pytest.approx(r["mse"], rel=1e-12)


def test_classification_examples():
    assert classification_error([1, -1, 1], [0.5, -2.0, 0.1]) == 0.0
    # predictions +, +, - against labels +, -, +: two mistakes
    assert classification_error([1, -1, 1], [0.3, 0.2, -0.1]) == pytest.approx(2 / 3)
    assert classification_error([1, -1, -1, 1], np.zeros(4)) == 0.5
    assert classification_error([0, 2, 1], np.eye(3)[[0, 1, 1]]) == pytest.approx(1 / 3)
    with pytest.raises(ValueError, match="empty"):
        classification_error([], [])


def test_auc_examples():
    assert auc([1, 1, -1, -1], [0.9, 0.8, 0.1, 0.2]) == 1.0
    assert auc([1, -1, 1, -1], np.ones(4)) == 0.5
    assert auc([1, 1, -1, -1], [0.8, 0.4, 0.6, 0.2]) == 0.75
    with pytest.raises(ValueError, match="both"):
        auc([1, 1], [0.1, 0.2])


@given(st.integers(0, 2**32 - 1))
def test_auc_monotone_invariance(seed):
    rng = np.random.default_rng(seed)
    y = np.where(rng.random(60) < 0.5, 1.0, -1.0)
    y[:2] = [1.0, -1.0]
    s = np.round(rng.standard_normal(60), 1)
    a = auc(y, s)
    assert a == pytest.approx(brute_auc(y, s), abs=1e-12)
    assert auc(y, np.exp(s)) == a
    assert auc(y, 3.0 * s - 7.0) == a


def test_evaluate_dispatch(tmp_path):
    rep = evaluate([1.0, -1.0, 1.0, -1.0], [0.2, -0.3, -0.1, -0.5], task="binary")
    assert (rep.c_err, rep.auc, rep.mse) == (0.25, 1.0, None)
    rep = evaluate([2.0, 2.0], [1.0, 3.0])
    assert rep.to_csv_row().splitlines() == ["n_test,mse,rmse,relative_error,c_err,auc", "2,1.0,1.0,0.5,,"]
    assert "c_err" in rep.to_table() and rep.to_table().splitlines()[4].endswith("-")
    assert evaluate([0, 1], np.eye(2), task="multiclass").c_err == 0.0
    with pytest.raises(ValueError, match="task"):
        evaluate([1.0], [1.0], task="ranking")
    assert isinstance(rep, EvalReport)
