"""
How many centers are enough
===========================

The preconditioned operator approaches the identity as centers are added.
Its condition number tells how fast conjugate gradient will converge.
"""
from falkon import FalkonConfig, KernelSpec, falkon_train
from falkon.diagnostics import COND_TARGET, cg_exponent, theory_report
from falkon.synthetic import make_regression

train = make_regression(n=800, d=5, sigma=1.5, seed=3)
kernel = KernelSpec.gaussian(1.5)
lam = 1e-3

print(f"target condition number {COND_TARGET:.2f} (below it the error bound halves every 1.4 steps)")
for M in [10, 25, 50, 100, 200, 400]:
    model, report = falkon_train(train, FalkonConfig(kernel, lam, M, t=1, seed=0))
    rep = theory_report(train, model.centers, report.factors, kernel, lam)
    print(f"M={M:4d}  cond(W)={rep.cond_W:10.2f}  cg exponent={cg_exponent(rep.cond_W):.2f}")

print()
print(theory_report(train, model.centers, report.factors, kernel, lam).to_text())
