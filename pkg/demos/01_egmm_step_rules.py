"""EGMM on a two-sided bilinear QP under the two step rules.

The "theorem" rule uses sigma_x = (L + ||A||)/2 and so on; "safe" doubles
every entry. The script prints the measured penalty gap next to the bound
that belongs to each rule. Watch the theorem-rule ratio grow with T while
the safe-rule ratio stays flat.

    python demos/01_egmm_step_rules.py
"""

from saddlekit import RunConfig, gen_bilinear_qp, penalty_gap, run, theoretical_bound

problem = gen_bilinear_qp(0)
print(f"instance: dx={problem.dx}, dy={problem.dy}, n={problem.n}, m={problem.m}, "
      f"L={problem.L:.3f}, ||A||={problem.norm_A:.3f}, ||B||={problem.norm_B:.3f}")

for metric in ("theorem", "safe"):
    print(f"\nstep rule: {metric}")
    print(f"{'T':>6} {'gap(rho=10)':>13} {'bound':>10} {'ratio':>7}")
    for T in (50, 100, 200, 400, 800):
        x_bar, y_bar, _ = run(problem, RunConfig(algorithm="egmm", T=T, egmm_metric=metric))
        gap = penalty_gap(problem, x_bar, y_bar, rho=10.0).penalty_gap
        bound = theoretical_bound(3, problem, T, 10.0, metric=metric)
        print(f"{T:>6} {gap:>13.4e} {bound:>10.4f} {gap / bound:>7.3f}")
