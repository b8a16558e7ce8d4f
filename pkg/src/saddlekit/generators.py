"""Instance generators. Every generator is a pure function of its arguments;
the same seed gives bitwise identical problems.
"""

from __future__ import annotations

import itertools
from dataclasses import replace

import numpy as np

from .linalg import Box, NonnegBall, PiecewiseLinearMax, Quadratic, Simplex, Zero, operator_norm
from .problem import QuadraticCoupling, SaddleProblem

__all__ = [
    "gen_bilinear_qp", "gen_resource_game", "gen_mdp_occupancy", "gen_divergent_admm",
    "gen_pwl_saddle", "gen_conic_qp", "gen_tiny", "gen_min_qp", "slack_radius", "estimate_ell",
    "GENERATORS", "generate",
]


def _diag_spectrum(rng, dim, condition, scale=1.0):
    # log-uniform in [1/condition, 1], scaled
    if dim == 0:
        return np.zeros(0)
    return scale * np.exp(-np.log(condition) * rng.uniform(size=dim))


def _quad_terms(rng, n_blocks, dim, curv, mu, lin_scale):
    terms = []
    for _ in range(n_blocks):
        diag = mu + curv * rng.uniform(size=dim)
        if mu > 0:
            diag[rng.integers(dim)] = mu
        terms.append(Quadratic(diag, lin_scale * rng.standard_normal(dim)))
    return terms


def gen_bilinear_qp(seed, n_blocks_x=2, n_blocks_y=2, block_dim=4, rows_n=3, rows_m=3,
                    condition=10.0, *, coupling_scale=1.0, h_curv=0.5, g_curv=0.5,
                    mu_h=0.0, mu_g=0.0, box=1.0):
    """Quadratic-bilinear saddle problem on boxes.

    Psi(x, y) = 0.5 x'Px + x'Ky - 0.5 y'Qy with diagonal PSD P, Q (spectra
    log-uniform in [1/condition, 1]) and dense K. h_i, g_j are separable
    quadratics with minimum curvature `mu_h`, `mu_g`. Sets are the boxes
    [-box, box]^d; a = A x0 and b = B y0 for an interior (x0, y0).
    ``rows_m = 0`` gives a one-sided problem.
    """
    if min(n_blocks_x, n_blocks_y, block_dim) < 1 or rows_n < 0 or rows_m < 0:
        raise ValueError("dimensions must be positive")
    if condition < 1:
        raise ValueError("condition must be >= 1")
    rng = np.random.default_rng(seed)
    dx, dy = n_blocks_x * block_dim, n_blocks_y * block_dim
    P = np.diag(_diag_spectrum(rng, dx, condition))
    Q = np.diag(_diag_spectrum(rng, dy, condition))
    K = coupling_scale * rng.standard_normal((dx, dy)) / np.sqrt(max(dx, dy))
    h = _quad_terms(rng, n_blocks_x, block_dim, h_curv, mu_h, 0.5)
    g = _quad_terms(rng, n_blocks_y, block_dim, g_curv, mu_g, 0.5)
    A = [rng.standard_normal((rows_n, block_dim)) for _ in range(n_blocks_x)]
    B = [rng.standard_normal((rows_m, block_dim)) for _ in range(n_blocks_y)]
    x0 = box * rng.uniform(-0.5, 0.5, dx)
    y0 = box * rng.uniform(-0.5, 0.5, dy)
    a = np.hstack(A) @ x0 if rows_n else np.zeros(0)
    b = np.hstack(B) @ y0 if rows_m else np.zeros(0)
    xb = [(Box.uniform(block_dim, -box, box), t) for t in h]
    yb = [(Box.uniform(block_dim, -box, box), t) for t in g]
    meta = {"generator": "bilinear_qp", "seed": seed,
            "params": dict(n_blocks_x=n_blocks_x, n_blocks_y=n_blocks_y, block_dim=block_dim,
                           rows_n=rows_n, rows_m=rows_m, condition=condition,
                           coupling_scale=coupling_scale, h_curv=h_curv, g_curv=g_curv,
                           mu_h=mu_h, mu_g=mu_g, box=box)}
    prob = SaddleProblem(xb, yb, QuadraticCoupling(P, K, Q), A, a, B, b, x0, y0, None, meta)
    return replace(prob, ell=estimate_ell(prob))


def gen_min_qp(seed, n_blocks=2, block_dim=3, rows_n=2, condition=10.0, *, mu_h=0.0, box=1.0):
    """Pure minimization instance (no y-side): 0.5 x'Px + h(x) s.t. A x = a."""
    rng = np.random.default_rng(seed)
    dx = n_blocks * block_dim
    G = rng.standard_normal((dx, dx)) / np.sqrt(dx)
    P = G @ G.T + np.diag(_diag_spectrum(rng, dx, condition, 0.1))
    h = _quad_terms(rng, n_blocks, block_dim, 0.5, mu_h, 0.5)
    A = [rng.standard_normal((rows_n, block_dim)) for _ in range(n_blocks)]
    x0 = box * rng.uniform(-0.5, 0.5, dx)
    a = np.hstack(A) @ x0
    xb = [(Box.uniform(block_dim, -box, box), t) for t in h]
    meta = {"generator": "min_qp", "seed": seed,
            "params": dict(n_blocks=n_blocks, block_dim=block_dim, rows_n=rows_n,
                           condition=condition, mu_h=mu_h, box=box)}
    coupling = QuadraticCoupling(P, np.zeros((dx, 0)), np.zeros((0, 0)))
    return SaddleProblem(xb, [], coupling, A, a, [], np.zeros(0), x0, np.zeros(0), 0.0, meta)


def slack_radius(a_norm, A_norms, max_norms):
    """||a|| + sum_i ||A_i|| * max_{x_i in X_i} ||x_i||."""
    return float(a_norm) + float(sum(an * mn for an, mn in zip(A_norms, max_norms)))


def _max_affine_norm(M, c, sets, n_samples=4096, rng=None):
    """Max of ||M z + c|| over a product of sets: exact by vertex enumeration for
    small boxes/simplices, else the max over deterministic samples."""
    verts = []
    for s in sets:
        if isinstance(s, Box) and s.dim <= 10:
            verts.append([np.array(v) for v in itertools.product(*zip(s.lo, s.hi))])
        elif isinstance(s, Simplex):
            verts.append(list(np.eye(s.dim)))
        else:
            verts = None
            break
    if verts is not None and np.prod([len(v) for v in verts]) <= 2 ** 14:
        best = 0.0
        for combo in itertools.product(*verts):
            z = np.concatenate(combo) if combo else np.zeros(0)
            best = max(best, float(np.linalg.norm(M @ z + c)))
        return best, True
    rng = np.random.default_rng(0) if rng is None else rng
    best = 0.0
    for _ in range(n_samples):
        z = np.concatenate([s.project(s.center() + rng.standard_normal(s.dim) * 10) for s in sets])
        best = max(best, float(np.linalg.norm(M @ z + c)))
    return best, False


def estimate_ell(problem, safety=1.1):
    """Bound on ||grad_y Psi - subgrad g|| over X x Y.

    grad_y Psi of a quadratic coupling is affine in (x, y); its norm is
    convex, so its maximum sits at a vertex and is exact when the vertex set
    is small enough to enumerate. The safety factor covers the sampled case.
    The piecewise-linear part contributes its largest slope norm.
    """
    c = problem.coupling
    curv, lin = [], []
    slope = 0.0
    for s, t in problem.y_blocks:
        if isinstance(t, Quadratic):
            curv.append(t.diag)
            lin.append(t.linear)
        else:
            curv.append(np.zeros(s.dim))
            lin.append(np.zeros(s.dim))
            if isinstance(t, PiecewiseLinearMax):
                slope = max(slope, t.subgrad_bound)
    curv = np.concatenate(curv) if curv else np.zeros(0)
    lin = np.concatenate(lin) if lin else np.zeros(0)
    M = np.hstack([c.K.T, -c.Q - np.diag(curv)])
    sets = [s for s, _ in problem.x_blocks] + [s for s, _ in problem.y_blocks]
    val, _ = _max_affine_norm(M, c.q - lin, sets)
    return safety * val + slope


def gen_pwl_saddle(seed, block_dim=3, rows_n=2, n_pieces=4, *, coupling_scale=1.0,
                   slope_scale=1.0, box=1.0, h_curv=0.5):
    """Two-block, one-sided instance whose y-term is a piecewise-linear max,
    so Phi(x, .) is nonsmooth and only supergradients are available."""
    rng = np.random.default_rng(seed)
    dx, dy = 2 * block_dim, block_dim
    P = np.diag(_diag_spectrum(rng, dx, 10.0))
    K = coupling_scale * rng.standard_normal((dx, dy)) / np.sqrt(dx)
    Q = np.zeros((dy, dy))
    h = _quad_terms(rng, 2, block_dim, h_curv, 0.0, 0.5)
    g = PiecewiseLinearMax(slope_scale * rng.standard_normal((n_pieces, dy)),
                           0.2 * rng.standard_normal(n_pieces))
    A = [rng.standard_normal((rows_n, block_dim)) for _ in range(2)]
    x0 = box * rng.uniform(-0.5, 0.5, dx)
    a = np.hstack(A) @ x0
    xb = [(Box.uniform(block_dim, -box, box), t) for t in h]
    yb = [(Box.uniform(dy, -box, box), g)]
    meta = {"generator": "pwl_saddle", "seed": seed,
            "params": dict(block_dim=block_dim, rows_n=rows_n, n_pieces=n_pieces,
                           coupling_scale=coupling_scale, slope_scale=slope_scale, box=box,
                           h_curv=h_curv)}
    prob = SaddleProblem(xb, yb, QuadraticCoupling(P, K, Q), A, a, [], np.zeros(0),
                         x0, np.zeros(dy), None, meta)
    return replace(prob, ell=estimate_ell(prob))


def gen_resource_game(seed, stages=2, dim_per_stage=3, budget_a=1.0, budget_b=1.0,
                      rows_n=2, rows_m=2, *, coupling_scale=1.0, curv=0.2):
    """Two-player multi-stage game with resource budgets.

    Stage i has simplex strategies x_i, y_i, local quadratic costs and a
    bilinear payoff x_i'K_i y_i. Resource use A_i x_i is nonnegative; a
    slack block x_N in the nonnegative orthant intersected with a ball of
    radius ||a|| + sum ||A_i|| max ||x_i|| closes the budget equation.
    """
    if stages < 2:
        raise ValueError("stages must be >= 2")
    if budget_a <= 0 or budget_b <= 0:
        raise ValueError("budgets must be positive")
    rng = np.random.default_rng(seed)
    d = dim_per_stage
    Ks = [coupling_scale * rng.standard_normal((d, d)) for _ in range(stages)]
    dx = dy = stages * d
    K = np.zeros((dx + rows_n, dy + rows_m))
    for i, Ki in enumerate(Ks):
        K[i * d:(i + 1) * d, i * d:(i + 1) * d] = Ki
    A = [rng.uniform(0.0, 1.0, (rows_n, d)) for _ in range(stages)]
    B = [rng.uniform(0.0, 1.0, (rows_m, d)) for _ in range(stages)]
    xc = np.full(d, 1.0 / d)
    a = sum(Ai @ xc for Ai in A) + budget_a
    b = sum(Bi @ xc for Bi in B) + budget_b
    rx = slack_radius(np.linalg.norm(a), [operator_norm(Ai) for Ai in A], [1.0] * stages)
    ry = slack_radius(np.linalg.norm(b), [operator_norm(Bi) for Bi in B], [1.0] * stages)
    xb = [(Simplex(d), Quadratic(curv * rng.uniform(size=d), 0.3 * rng.standard_normal(d)))
          for _ in range(stages)]
    yb = [(Simplex(d), Quadratic(curv * rng.uniform(size=d), 0.3 * rng.standard_normal(d)))
          for _ in range(stages)]
    xb.append((NonnegBall(rows_n, rx), Zero()))
    yb.append((NonnegBall(rows_m, ry), Zero()))
    A.append(np.eye(rows_n))
    B.append(np.eye(rows_m))
    x_feas = np.concatenate([np.tile(xc, stages), np.full(rows_n, float(budget_a))])
    y_feas = np.concatenate([np.tile(xc, stages), np.full(rows_m, float(budget_b))])
    coupling = QuadraticCoupling(np.zeros((dx + rows_n,) * 2), K, np.zeros((dy + rows_m,) * 2))
    meta = {"generator": "resource_game", "seed": seed,
            "params": dict(stages=stages, dim_per_stage=d, budget_a=budget_a,
                           budget_b=budget_b, rows_n=rows_n, rows_m=rows_m,
                           coupling_scale=coupling_scale, curv=curv),
            "slack_radius": {"x": rx, "y": ry}}
    return SaddleProblem(xb, yb, coupling, A, a, B, b, x_feas, y_feas, None, meta)


def gen_mdp_occupancy(seed, n_states=6, n_actions=2, n_clusters=2, discount=0.8, alpha=1.0,
                      *, local_curv=0.1):
    """Clustered occupancy-measure problem with a quadratic concave utility.

    With rho(mu) = c'mu - (alpha/2)||mu||^2, the conjugate splits the
    clusters. Writing the problem as a minimization over mu,

        min_mu max_w  sum_i h_i(mu_i) + w'mu - ||w + c||^2 / (2 alpha)
        s.t.  sum_a mu(s,a) - discount * sum_{s',a'} P(s|s',a') mu(s',a') = xi(s),

    where h_i = -r_i are the negated local utilities and the inner max
    recovers -rho(mu). x-blocks are cluster occupancies in [0, 1/(1-discount)].
    """
    if not 0 < discount < 1:
        raise ValueError("discount must lie in (0, 1)")
    if not 1 <= n_clusters <= n_states:
        raise ValueError("need 1 <= n_clusters <= n_states")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    rng = np.random.default_rng(seed)
    S, Act = n_states, n_actions
    P = rng.uniform(size=(S, Act, S))
    P /= P.sum(axis=2, keepdims=True)          # P[s', a', s] = P(s | s', a')
    xi = rng.uniform(size=S)
    xi /= xi.sum()
    c = rng.uniform(0.0, 1.0, S * Act)
    # columns ordered (s, a) with s major; clusters are contiguous state ranges
    E = np.kron(np.eye(S), np.ones((1, Act)))
    Pt = P.reshape(S * Act, S).T                # Pt[s, (s',a')] = P(s|s',a')
    A_full = E - discount * Pt
    # uniform-policy occupancy
    P_pi = P.mean(axis=1)                       # P_pi[s', s]
    M = np.eye(S) - discount * P_pi.T
    if abs(np.linalg.det(M)) < 1e-14:
        raise np.linalg.LinAlgError("singular flow system")
    d_state = np.linalg.solve(M, xi)
    mu_feas = np.repeat(d_state / Act, Act)
    bounds = np.array_split(np.arange(S), n_clusters)
    ub = 1.0 / (1.0 - discount)
    xb, A_blocks = [], []
    for states in bounds:
        cols = np.concatenate([np.arange(s * Act, (s + 1) * Act) for s in states])
        dim = len(cols)
        # negated concave local utility r_i(mu_i) = c_i'mu_i - 0.5 d ||mu_i||^2
        ci = 0.2 * rng.uniform(size=dim)
        xb.append((Box(np.zeros(dim), np.full(dim, ub)),
                   Quadratic(np.full(dim, local_curv), -ci)))
        A_blocks.append(A_full[:, cols])
    dx = S * Act
    wr = alpha * ub + float(np.abs(c).max()) + 1.0
    yb = [(Box.uniform(dx, -wr, wr), Zero())]
    coupling = QuadraticCoupling(np.zeros((dx, dx)), np.eye(dx), np.eye(dx) / alpha,
                                 np.zeros(dx), -c / alpha, -float(c @ c) / (2 * alpha))
    y_feas = np.clip(alpha * mu_feas - c, -wr, wr)
    meta = {"generator": "mdp_occupancy", "seed": seed,
            "params": dict(n_states=S, n_actions=Act, n_clusters=n_clusters,
                           discount=discount, alpha=alpha, local_curv=local_curv),
            "transition": P.tolist(), "xi": xi.tolist(), "c": c.tolist()}
    return SaddleProblem(xb, yb, coupling, A_blocks, xi, [], np.zeros(0), mu_feas, y_feas,
                         None, meta)


def gen_divergent_admm(seed=0, box=100.0, start=None):
    """Three 1-D blocks, h = 0, Psi = 0, A = [[1,1,1],[1,1,2],[1,2,2]].

    The classical counterexample matrix on which direct multi-block ADMM
    diverges. a = A (1,1,1); the solution set is the single point (1,1,1).
    """
    A = np.array([[1.0, 1.0, 1.0], [1.0, 1.0, 2.0], [1.0, 2.0, 2.0]])
    x_sol = np.ones(3)
    a = A @ x_sol
    xb = [(Box([-box], [box]), Zero()) for _ in range(3)]
    coupling = QuadraticCoupling(np.zeros((3, 3)), np.zeros((3, 0)), np.zeros((0, 0)))
    meta = {"generator": "divergent_admm", "seed": seed, "params": {"box": box}}
    return SaddleProblem(xb, [], coupling, [A[:, [i]] for i in range(3)], a, [], np.zeros(0),
                         x_sol, np.zeros(0), 0.0, meta)


def gen_conic_qp(seed, n_blocks_x=2, n_blocks_y=1, block_dim=2, rows_n=2, rows_m=0,
                 condition=4.0, *, slack=0.3):
    """Bilinear QP with inequality constraints A x <= a (nonnegative-orthant
    cone), tagged for `conic_to_equality`. The boxes contain the origin, so
    the slack radius formula bounds every feasible slack."""
    base = gen_bilinear_qp(seed, n_blocks_x, n_blocks_y, block_dim, rows_n, rows_m, condition)
    rng = np.random.default_rng([seed, 7])
    a = base.a + slack * rng.uniform(0.5, 1.0, base.n)
    b = base.b + slack * rng.uniform(0.5, 1.0, base.m) if base.m else base.b
    cones = {"x": "nonneg"}
    if base.m:
        cones["y"] = "nonneg"
    meta = dict(base.meta, generator="conic_qp", cones=cones)
    return replace(base, a=a, b=b, meta=meta)


def gen_tiny(seed, dx=2, dy=2, rows_n=1, rows_m=0):
    """Tiny quadratic instance (total dim <= 4 per side) on boxes, for
    cross-validating the certifier against grid enumeration."""
    return gen_bilinear_qp(seed, 1, 1, dx, rows_n, rows_m, 4.0, h_curv=0.5, g_curv=0.5)


GENERATORS = {
    "bilinear_qp": gen_bilinear_qp,
    "resource_game": gen_resource_game,
    "mdp_occupancy": gen_mdp_occupancy,
    "divergent_admm": gen_divergent_admm,
    "pwl_saddle": gen_pwl_saddle,
    "conic_qp": gen_conic_qp,
    "min_qp": gen_min_qp,
    "tiny": gen_tiny,
}


def generate(desc):
    """Build a problem from ``{"generator": id, "seed": s, "params": {...}}``."""
    gid = desc["generator"]
    if gid not in GENERATORS:
        raise ValueError(f"unknown generator {gid!r}")
    return GENERATORS[gid](desc.get("seed", 0), **desc.get("params", {}))
