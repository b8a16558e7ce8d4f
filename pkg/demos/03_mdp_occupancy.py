"""A clustered MDP written as a saddle problem over occupancy measures.

x collects per-cluster state-action occupancies tied together by the flow
equations A x = xi. The y-side is the dual variable of a smooth utility.
EGMM handles the coupled constraints directly, and the certifier reports
how far the averaged point is from optimal.

    python demos/03_mdp_occupancy.py
"""

import numpy as np

from saddlekit import RunConfig, gen_mdp_occupancy, penalty_gap, run

problem = gen_mdp_occupancy(0, n_states=8, n_actions=3, n_clusters=2, discount=0.9)
P = np.array(problem.meta["transition"])
print(f"{P.shape[0]} states x {P.shape[1]} actions, discount 0.9; "
      f"rows of P sum to 1: {np.allclose(P.sum(axis=2), 1.0)}")
mu = problem.x_feas
print(f"reference occupancy: flow residual {np.linalg.norm(problem.residual_x(mu)):.1e}, "
      f"total mass {mu.sum():.6f} (1/(1-0.9) = 10)")

for T in (200, 800, 3200):
    x_bar, y_bar, _ = run(problem, RunConfig(algorithm="egmm", T=T, egmm_metric="safe"))
    rep = penalty_gap(problem, x_bar, y_bar, rho=10.0)
    print(f"T={T:>5}: penalty gap {rep.penalty_gap:.3e}, flow residual {rep.res_x:.2e}, "
          f"mass {x_bar.sum():.4f}")
