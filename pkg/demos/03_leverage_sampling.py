"""
Choosing centers by leverage
============================

Uniform sampling treats every point alike. Leverage scores weight points by
how much they matter to the kernel fit, which helps when the data has a few
isolated regions.
"""
import numpy as np

from falkon import FalkonConfig, KernelSpec, falkon_predict, falkon_train
from falkon.data import Dataset, split_train_test
from falkon.kernels import kernel_square
from falkon.metrics import regression_metrics
from falkon.sampling import exact_leverage_scores

rng = np.random.default_rng(0)
# a dense blob plus a sparse, far-away cluster with a different response
bulk = rng.normal(0.0, 0.5, size=(1900, 2))
rare = rng.normal(4.0, 0.3, size=(100, 2))
X = np.vstack([bulk, rare])
y = np.where(X[:, 0] > 2, np.sin(3 * X[:, 1]), X[:, 0] ** 2) + 0.05 * rng.standard_normal(len(X))
train, test = split_train_test(Dataset(X, y), 0.25, seed=1)

kernel = KernelSpec.gaussian(0.7)
lam = 1e-6
scores = exact_leverage_scores(kernel_square(kernel, train.features), lam)
rare_share = scores.scores[train.features[:, 0] > 2].sum() / scores.scores.sum()
print(f"effective dimension {scores.scores.sum():.1f}; rare cluster holds {rare_share:.0%} of the leverage")

for sampling in ["uniform", "leverage"]:
    rmses = []
    for seed in range(5):
        cfg = FalkonConfig(kernel, lam, M=60, t=30, sampling=sampling, scores=scores, seed=seed)
        model, _ = falkon_train(train, cfg)
        rmses.append(regression_metrics(test.labels, falkon_predict(model, test))["rmse"])
    print(f"{sampling:8s} M=60  test rmse over 5 seeds: median {np.median(rmses):.4f}, worst {max(rmses):.4f}")
