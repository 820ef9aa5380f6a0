"""
Why precondition
================

On a badly conditioned problem, plain gradient descent and plain conjugate
gradient on the Nystrom system need many steps. The preconditioned solver
reaches the same accuracy in a handful.
"""
import numpy as np

from falkon import FalkonConfig, KernelSpec, falkon_predict, falkon_train
from falkon.baselines import cg_nystrom_unpreconditioned, gd_nystrom, nystrom_direct
from falkon.sampling import sample_uniform
from falkon.solver import FalkonModel
from falkon.synthetic import make_ill_conditioned

train = make_ill_conditioned(n=1000, seed=0)
kernel = KernelSpec.gaussian(2.0)
lam, M = 1e-4, 100
centers = sample_uniform(train.n, M, seed=0)
target = falkon_predict(nystrom_direct(train, centers, kernel, lam), train)


def error(alpha, C):
    pred = falkon_predict(FalkonModel(C, alpha, kernel), train)
    return np.linalg.norm(pred - target) / np.linalg.norm(target)


C = centers.centers_of(train.features)
for name, budget in [("falkon", 30), ("cg", 30), ("gd", 30)]:
    errs = []
    if name == "falkon":
        falkon_train(train, FalkonConfig(kernel, lam, M, budget), centers=centers,
                     callback=lambda k, a: errs.append(error(a, C)))
    elif name == "cg":
        # one run per budget, since the baseline reports only its final iterate
        for k in range(1, budget + 1):
            m, _ = cg_nystrom_unpreconditioned(train, centers, kernel, lam, k, trace=False)
            errs.append(error(m.alpha, C))
    else:
        for k in range(1, budget + 1):
            m, _ = gd_nystrom(train, centers, kernel, lam, k)
            errs.append(error(m.alpha, C))
    path = "  ".join(f"{e:.1e}" for e in errs[::5])
    print(f"{name:7s} relative error every 5 steps: {path}")
