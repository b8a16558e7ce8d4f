"""Solvers for affinely constrained multi-block saddle-point problems.

min_x max_y  h(x) + Psi(x, y) - g(y)  subject to  A x = a,  B y = b,
with x and y split into blocks over simple convex sets.
"""

from .admm import (
    AdmmState, augmented_lagrangian, lemma2_slack, lemmaN_slack, prox_admm_step,
    solve_block_subproblem, strong_convexity_gamma,
)
from .bench import ConfigError, ExperimentConfig, RateFit, emit_svg, rate_fit, run_scenario
from .certify import (
    CertificationError, GapReport, best_response, brute_force_gap, check_step_inequality,
    penalty_gap, residuals, sample_probes,
)
from .generators import (
    GENERATORS, gen_bilinear_qp, gen_conic_qp, gen_divergent_admm, gen_mdp_occupancy,
    gen_min_qp, gen_pwl_saddle, gen_resource_game, gen_tiny, generate,
)
from .linalg import (
    Ball, BlockLayout, BlockVector, Box, Free, NonnegBall, PiecewiseLinearMax, ProxError,
    Quadratic, Ridged, ScaledL1, Simplex, Zero, diameter, operator_norm, project, prox,
)
from .problem import (
    CallableCoupling, QuadraticCoupling, SaddleProblem, check_gradient, conic_to_equality,
    perturb, phi_value,
)
from .solvers import (
    ALGORITHMS, TRACE_COLUMNS, Iterate, RunConfig, SolverError, StepSizes, Trace,
    default_stepsizes, run, run_admm_min, run_egmm, run_perturbed, run_seg_admm, run_ssg_admm,
    theoretical_bound,
)

__version__ = "0.1.0"
