"""
Files, sparse input and the command line
========================================

Datasets round-trip through the dense CSV and sparse index:value formats,
trained models through a small binary file, and the same run can be driven
from the ``falkon`` command.
"""
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from falkon import FalkonConfig, KernelSpec, falkon_predict, falkon_train
from falkon.data import Dataset, load_sparse_index_value, write_sparse_index_value
from falkon.solver import load_model, save_model

rng = np.random.default_rng(0)
X = sp.random(500, 50, density=0.05, format="csr", random_state=1)
y = np.asarray(X.sum(axis=1)).ravel() + 0.01 * rng.standard_normal(500)

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    write_sparse_index_value(Dataset(X, y), tmp / "data.svm")
    print((tmp / "data.svm").read_text().splitlines()[0])
    ds = load_sparse_index_value(tmp / "data.svm", n_features=50)

    model, _ = falkon_train(ds, FalkonConfig(KernelSpec.linear(), 1e-6, M=100, t=20))
    save_model(model, tmp / "model.bin")
    back = load_model(tmp / "model.bin")
    same = np.array_equal(falkon_predict(back, ds), falkon_predict(model, ds))
    print(f"model file {(tmp / 'model.bin').stat().st_size} bytes, predictions identical after reload: {same}")

    cmd = [sys.executable, "-m", "falkon", "run", "--data", str(tmp / "data.svm"), "--format", "sparse",
           "--kernel", "linear", "--lambda", "1e-6",
           # the linear kernel has no intercept, so fit the labels around their mean
           "--center-labels", "--centers", "100", "--out", str(tmp / "run")]
    subprocess.run(cmd, check=True)
    print((tmp / "run" / "report.txt").read_text())
