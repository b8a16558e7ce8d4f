"""Checking the one-step inequalities behind the convergence proofs.

Every solver reports its consecutive iterates through ``on_step``. The
certifier evaluates each inequality's right side minus its left side at
random feasible comparators. A negative value is a violated inequality.

    python demos/04_one_step_inequalities.py
"""

import numpy as np

from saddlekit import RunConfig, check_step_inequality, gen_bilinear_qp, gen_pwl_saddle, run, sample_probes

cases = [
    ("lemma2", "seg_admm", gen_bilinear_qp(0, rows_m=0), "theorem"),
    ("lemma3", "ssg_admm", gen_pwl_saddle(0), "theorem"),
    ("lemma4", "seg_admm", gen_bilinear_qp(0, rows_m=0), "theorem"),
    ("lemma7", "seg_admm", gen_bilinear_qp(0, n_blocks_x=3, rows_m=0, mu_h=1.0), "theorem"),
    ("lemma5", "egmm", gen_bilinear_qp(0), "theorem"),
    ("lemma5", "egmm", gen_bilinear_qp(0), "safe"),
]
for kind, alg, problem, metric in cases:
    snaps = []
    run(problem, RunConfig(algorithm=alg, T=50, egmm_metric=metric), on_step=snaps.append)
    probes = sample_probes(problem, np.random.default_rng(0), 5)
    slack = check_step_inequality(kind, problem, snaps, probes, metric=metric)
    verdict = "holds" if slack >= -1e-8 else "VIOLATED"
    print(f"{kind:<7} via {alg:<9} metric={metric:<8} min slack {slack:+.3e}  {verdict}")
