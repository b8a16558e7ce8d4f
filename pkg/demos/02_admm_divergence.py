"""Plain three-block ADMM diverges; EGMM and perturbed SEG-ADMM do not.

The instance has three scalar blocks, h = 0 and
A = [[1,1,1],[1,1,2],[1,2,2]], a classical case where the direct
Gauss-Seidel extension of ADMM fails. We start every method at the origin.

    python demos/02_admm_divergence.py
"""

import numpy as np

from saddlekit import RunConfig, gen_divergent_admm, penalty_gap, run, run_admm_min, run_perturbed

problem = gen_divergent_admm()
x0 = problem.center_x()
r0 = np.linalg.norm(problem.residual_x(x0))

_, trace = run_admm_min(problem, RunConfig(algorithm="admm_min", T=1000, x0=x0))
res = trace.column("res_x")
print(f"plain ADMM: initial residual {r0:.3f}")
for k in (10, 100, 500, 1000):
    print(f"  iteration {k:>4}: ||Ax - a|| = {res[k - 1]:.3f}")
print(f"  largest residual {res.max():.2f} ({res.max() / r0:.1f}x the initial value)")

x_bar, y_bar, _ = run(problem, RunConfig(algorithm="egmm", T=5000, egmm_metric="safe", x0=x0))
print(f"\nEGMM, T=5000: penalty gap {penalty_gap(problem, x_bar, y_bar, 10.0).penalty_gap:.2e}")

# the perturbed variant also converges here, but slowly: the gap falls like 1/T
# from a large constant, so reaching 1e-2 takes about 1e5 iterations
for T in (1000, 4000):
    x_bar, y_bar, tr = run_perturbed("seg", problem, RunConfig(algorithm="seg_admm", T=T, x0=x0))
    gap = penalty_gap(problem, x_bar, y_bar, 10.0).penalty_gap
    print(f"perturbed SEG-ADMM, T={T}: eps={tr.extra['eps']:.4f}, penalty gap {gap:.3f}")
