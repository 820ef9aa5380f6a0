"""
Fitting a kernel model with FALKON
==================================

A synthetic regression problem, solved three ways: the iterative FALKON
solver, the exact Nystrom solution it converges to, and full kernel ridge
regression on every point.
"""
import time

import numpy as np

from falkon import FalkonConfig, KernelSpec, falkon_predict, falkon_train
from falkon.baselines import krr_direct, nystrom_direct
from falkon.data import split_train_test
from falkon.metrics import regression_metrics
from falkon.synthetic import make_regression

data = make_regression(n=3000, d=5, sigma=2.0, seed=0)
train, test = split_train_test(data, 0.2, seed=0)
kernel = KernelSpec.gaussian(2.0)
lam = 1e-5

# 300 random centers and 20 conjugate gradient steps
config = FalkonConfig(kernel, lam, M=300, t=20, seed=0)
t0 = time.perf_counter()
model, report = falkon_train(train, config)
print(f"falkon          rmse={regression_metrics(test.labels, falkon_predict(model, test))['rmse']:.4f}"
      f"  ({time.perf_counter() - t0:.2f}s)")

# the dense solve on the same centers is what the iterations approach
exact = nystrom_direct(train, report.selection, kernel, lam)
p_exact = falkon_predict(exact, test)
gap = np.linalg.norm(falkon_predict(model, test) - p_exact) / np.linalg.norm(p_exact)
print(f"nystrom direct  rmse={regression_metrics(test.labels, falkon_predict(exact, test))['rmse']:.4f}"
      f"  (relative gap to falkon {gap:.1e})")

# all 2400 training points as centers: cubic cost, the reference answer
t0 = time.perf_counter()
full = krr_direct(train, kernel, lam)
print(f"full krr        rmse={regression_metrics(test.labels, falkon_predict(full, test))['rmse']:.4f}"
      f"  ({time.perf_counter() - t0:.2f}s)")
