"""
Classification
==============

Binary problems are fitted on +1/-1 targets and scored by the sign of the
prediction. Several classes share one factorization and solve one-vs-rest.
"""
import numpy as np

from falkon import FalkonConfig, KernelSpec, falkon_predict, falkon_train
from falkon.data import Dataset, split_train_test
from falkon.metrics import auc, classification_error
from falkon.synthetic import make_classification

data = make_classification(n=2000, d=4, sigma=1.0, seed=0)
train, test = split_train_test(data, 0.25, seed=0)
model, _ = falkon_train(train, FalkonConfig(KernelSpec.gaussian(1.0), 1e-5, M=200, t=15))
scores = falkon_predict(model, test)
print(f"binary      c_err={classification_error(test.labels, scores):.3f}  auc={auc(test.labels, scores):.3f}")

# three classes from the quadrant of the first two coordinates
rng = np.random.default_rng(1)
X = rng.uniform(-1, 1, size=(2000, 2))
cls = (X[:, 0] > 0).astype(int) + (X[:, 1] > 0).astype(int)
targets = -np.ones((2000, 3))
targets[np.arange(2000), cls] = 1.0
train, test = split_train_test(Dataset(X, targets), 0.25, seed=0)
model, _ = falkon_train(train, FalkonConfig(KernelSpec.gaussian(0.5), 1e-6, M=200, t=20))
pred = falkon_predict(model, test)
print(f"multiclass  c_err={classification_error(test.labels.argmax(axis=1), pred):.3f}  alpha shape {model.alpha.shape}")
