"""Proximal ADMM sweep on the linearized augmented Lagrangian, its block
subproblem solver, and the one-step descent inequalities it satisfies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .inner import box_qp_polish, minimize_composite
from .linalg import Box, Free, Quadratic, ScaledL1, Zero, prox
from .problem import as_flat, phi_value

__all__ = [
    "AdmmState", "prox_admm_step", "solve_block_subproblem", "lemma2_slack",
    "lemmaN_slack", "strong_convexity_gamma", "augmented_lagrangian",
]


@dataclass
class AdmmState:
    """x (flat), multiplier lam, penalty gamma > 0, proximal weight sigma >= 0."""

    x: np.ndarray
    lam: np.ndarray
    gamma: float
    sigma: float

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(-1)
        self.lam = np.asarray(self.lam, dtype=float).reshape(-1)
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.sigma >= 0:
            raise ValueError("sigma must be nonnegative")


def _quad_parts(term, dim):
    """(diag, linear) if the term is Zero or Quadratic, else None."""
    if isinstance(term, Zero):
        return np.zeros(dim), np.zeros(dim)
    if isinstance(term, Quadratic):
        return term.diag, term.linear
    return None


def solve_block_subproblem(block_set, block_term, quad, linear, x_ref, tol=1e-10):
    """argmin_{w in set} 0.5 w'Qw + linear'w + term(w).

    Parameters
    ----------
    quad : ndarray
        The PSD matrix Q (gamma * A_i'A_i + sigma * I in the ADMM sweep).
    linear : ndarray
    x_ref : ndarray
        Warm start.

    Closed forms are used for quadratic/zero terms on free space and for
    diagonal Q on boxes. Everything else runs accelerated proximal gradient
    to a gradient-mapping residual of `tol`, with an exact active-set polish
    when the term is quadratic and the set is a box.
    """
    Q = np.atleast_2d(np.asarray(quad, dtype=float))
    c = np.asarray(linear, dtype=float).reshape(-1)
    dim = c.shape[0]
    qp = _quad_parts(block_term, dim)
    diagonal = not np.any(Q - np.diag(np.diag(Q)))

    if qp is not None:
        H = Q + np.diag(qp[0])
        cc = c + qp[1]
        if isinstance(block_set, Free):
            try:
                return np.linalg.solve(H, -cc)
            except np.linalg.LinAlgError:
                return np.linalg.lstsq(H, -cc, rcond=None)[0]
        if isinstance(block_set, Box) and diagonal:
            hd = np.diag(H)
            if np.all(hd > 0):
                return np.clip(-cc / hd, block_set.lo, block_set.hi)
    elif isinstance(block_term, ScaledL1) and isinstance(block_set, (Box, Free)) and diagonal:
        hd = np.diag(Q)
        if np.all(hd > 0):
            v = -c / hd
            t = block_term.weight / hd
            return block_set.project(np.sign(v) * np.maximum(np.abs(v) - t, 0.0))

    lip = float(np.linalg.eigvalsh(Q).max()) if dim else 0.0
    grad = lambda w: Q @ w + c
    pfn = lambda v, step: prox(block_term, block_set, v, step, tol=tol * 1e-2)
    polish = None
    if qp is not None and isinstance(block_set, Box):
        H = Q + np.diag(qp[0])
        cc = c + qp[1]
        polish = lambda w: box_qp_polish(H, cc, block_set.lo, block_set.hi, w)
    x0 = block_set.project(np.asarray(x_ref, dtype=float))
    w, _ = minimize_composite(grad, lip, pfn, x0, tol, polish=polish)
    return w


def prox_admm_step(problem, state, y_tilde, tol=1e-10, order=None, grad_x=None):
    """One Gauss-Seidel sweep of the proximal ADMM followed by the multiplier step.

    Each block minimizes, over its set,
        h_i(w) + <grad_{x_i} Psi(x^k, y_tilde), w> - <lam, A_i w>
               + gamma/2 ||A_i w + r_{-i}||^2 + sigma/2 ||w - x_i^k||^2,
    where r_{-i} uses the updated blocks before i and the stale blocks after i.
    Then ``lam+ = lam - gamma (A x+ - a)``.

    Parameters
    ----------
    order : sequence of int, optional
        Block visiting order (default 0..N-1).
    grad_x : ndarray, optional
        Precomputed grad_x Psi(x^k, y_tilde).
    """
    if problem.n < 1:
        raise ValueError("prox_admm_step needs at least one x-constraint row")
    y_tilde = as_flat(y_tilde, problem.dy)
    x = state.x.copy()
    gamma, sigma, lam = state.gamma, state.sigma, state.lam
    gx = problem.coupling.grad_x(state.x, y_tilde) if grad_x is None else grad_x
    slices = problem.x_layout.slices
    r = problem.A @ x - problem.a  # running residual, updated after each block
    for i in (range(problem.N) if order is None else order):
        sl = slices[i]
        Ai = problem.A_blocks[i]
        s, t = problem.x_blocks[i]
        xi_old = x[sl]
        r_minus = r - Ai @ xi_old
        Q = gamma * (Ai.T @ Ai) + sigma * np.eye(len(xi_old))
        lin = gx[sl] - Ai.T @ lam + gamma * (Ai.T @ r_minus) - sigma * state.x[sl]
        xi_new = solve_block_subproblem(s, t, Q, lin, xi_old, tol)
        x[sl] = xi_new
        r = r_minus + Ai @ xi_new
    lam_new = lam - gamma * problem.residual_x(x)
    return AdmmState(x, lam_new, gamma, sigma)


def augmented_lagrangian(problem, x, lam, gamma, x_tilde, y_tilde):
    """Linearized augmented Lagrangian at x for anchor (x_tilde, y_tilde)."""
    gx = problem.coupling.grad_x(x_tilde, y_tilde)
    r = problem.residual_x(x)
    return problem.h(x) + gx @ (x - x_tilde) - lam @ r + 0.5 * gamma * (r @ r)


def _check_feasible(problem, x_feas, tol=1e-9):
    if np.linalg.norm(problem.residual_x(x_feas)) > tol:
        raise ValueError("comparator point violates A x = a")


def _common_terms(problem, k, k1, y_tilde, x, lam):
    lhs = (phi_value(problem, k1.x, y_tilde) - phi_value(problem, x, y_tilde)
           - lam @ problem.residual_x(k1.x))
    g, s = k.gamma, k.sigma
    rhs = (1.0 / (2 * g)) * (np.sum((lam - k.lam) ** 2) - np.sum((lam - k1.lam) ** 2))
    rhs += 0.5 * s * (np.sum((x - k.x) ** 2) - np.sum((x - k1.x) ** 2))
    rhs -= 0.5 * (s - problem.L_x) * np.sum((k.x - k1.x) ** 2)
    return lhs, rhs


def _partial_residual(problem, x_head, x_tail, j):
    """A(x_{1:j-1}, x_tail_{j:N}) - a with 0-based split index j."""
    sl = problem.x_layout.slices
    r = -problem.a.copy()
    for i in range(problem.N):
        src = x_head if i < j else x_tail
        r += problem.A_blocks[i] @ src[sl[i]]
    return r


def lemma2_slack(problem, state_k, state_k1, y_tilde, x_feas, lambda_probe):
    """RHS - LHS of the two-block Prox-ADMM descent inequality.

    Valid for any comparator x in X with A x = a and any multiplier probe.
    """
    if problem.N != 2:
        raise ValueError("lemma2_slack applies to N = 2; use lemmaN_slack")
    x = as_flat(x_feas, problem.dx)
    _check_feasible(problem, x)
    y_tilde = as_flat(y_tilde, problem.dy)
    lam = np.asarray(lambda_probe, dtype=float)
    lhs, rhs = _common_terms(problem, state_k, state_k1, y_tilde, x, lam)
    g = state_k.gamma
    rhs += 0.5 * g * (np.sum(_partial_residual(problem, x, state_k.x, 1) ** 2)
                      - np.sum(_partial_residual(problem, x, state_k1.x, 1) ** 2))
    return float(rhs - lhs)


def strong_convexity_gamma(mu, block_norms):
    """gamma = 1/(N(N-1)) * min_{i>=2} mu_i / ||A_i||^2."""
    N = len(mu)
    if N < 2:
        raise ValueError("need at least two blocks")
    ratios = []
    for m_i, a_i in zip(mu[1:], block_norms[1:]):
        if a_i == 0:
            continue
        ratios.append(m_i / a_i ** 2)
    if not ratios:
        raise ValueError("all constraint blocks i >= 2 are zero")
    return min(ratios) / (N * (N - 1))


def lemmaN_slack(problem, state_k, state_k1, y_tilde, x_feas, lambda_probe, mu=None):
    """RHS - LHS of the multi-block (N >= 3) Prox-ADMM descent inequality
    under partial strong convexity of h_2..h_N.

    Parameters
    ----------
    mu : sequence of float, optional
        Strong-convexity moduli (defaults to the problem's recorded moduli).
    """
    N = problem.N
    if N < 3:
        raise ValueError("lemmaN_slack needs N >= 3; use lemma2_slack")
    mu = problem.mu if mu is None else list(mu)
    if any(m <= 0 for m in mu[1:]):
        raise ValueError("blocks i >= 2 need positive strong-convexity moduli")
    g = state_k.gamma
    norms = problem.block_norms_A
    g_max = strong_convexity_gamma(mu, norms)
    if g > g_max * (1 + 1e-12):
        raise ValueError(f"gamma={g:g} exceeds the admissible value {g_max:g}")
    x = as_flat(x_feas, problem.dx)
    _check_feasible(problem, x)
    y_tilde = as_flat(y_tilde, problem.dy)
    lam = np.asarray(lambda_probe, dtype=float)
    lhs, rhs = _common_terms(problem, state_k, state_k1, y_tilde, x, lam)
    for j in range(1, N):
        rhs += 0.5 * g * (np.sum(_partial_residual(problem, x, state_k.x, j) ** 2)
                          - np.sum(_partial_residual(problem, x, state_k1.x, j) ** 2))
    sl = problem.x_layout.slices
    for i in range(1, N):
        coef = mu[i] - g * N * (N - 1) * norms[i] ** 2
        rhs -= 0.5 * coef * np.sum((x[sl[i]] - state_k1.x[sl[i]]) ** 2)
    return float(rhs - lhs)
