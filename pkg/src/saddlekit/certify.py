"""Saddle-point certification: feasibility residuals, best responses over the
affinely restricted sets, the penalty gap, a grid oracle for tiny instances
and the one-step inequality checkers.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .admm import lemma2_slack, lemmaN_slack
from .inner import box_qp_polish, minimize_composite
from .linalg import Ball, Box, Free, PiecewiseLinearMax, ProxError, Quadratic, Zero, operator_norm, prox
from .problem import as_flat, phi_value

__all__ = [
    "GapReport", "CertificationError", "residuals", "best_response", "penalty_gap",
    "brute_force_gap", "check_step_inequality", "lemma3_slack", "lemma4_slack",
    "lemma5_slack", "egmm_G", "sample_probes", "LEMMA_KINDS",
]

LEMMA_KINDS = ("lemma2", "lemma3", "lemma4", "lemma5", "lemma7")
ALM_MAX_OUTER = 500


class CertificationError(RuntimeError):
    """Best-response solve did not reach its tolerance.

    Attributes
    ----------
    value, point, residual : best iterate found so far and its KKT residual
    """

    def __init__(self, msg, value, point, residual):
        super().__init__(msg)
        self.value, self.point, self.residual = value, point, residual


@dataclass
class GapReport:
    br_max: float
    br_min: float
    res_x: float
    res_y: float
    rho: float
    penalty_gap: float
    kkt_max: float = 0.0
    kkt_min: float = 0.0
    tol: float = 0.0
    converged: bool = True
    gap_rho1: float = None
    argmax_y: list = field(default=None, repr=False)
    argmin_x: list = field(default=None, repr=False)
    error_bound: float = None

    def recompute(self):
        return self.br_max - self.br_min + self.rho * self.res_x + self.rho * self.res_y

    def at_rho(self, rho):
        return self.br_max - self.br_min + rho * (self.res_x + self.res_y)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def residuals(problem, x, y):
    """(||Ax - a||, ||By - b||); an absent constraint gives 0."""
    x = as_flat(x, problem.dx)
    y = as_flat(y, problem.dy)
    rx = float(np.linalg.norm(problem.residual_x(x))) if problem.n else 0.0
    ry = float(np.linalg.norm(problem.residual_y(y))) if problem.m else 0.0
    return rx, ry


# ---------------------------------------------------------------------------
# Best response by augmented Lagrangian
# ---------------------------------------------------------------------------

def _side_data(problem, side, anchor):
    """Smooth part, its Lipschitz constant and optional Hessian for the side
    being optimized, always cast as a minimization."""
    c = problem.coupling
    if side == "min_x":
        ybar = as_flat(anchor, problem.dy)
        const = -problem.g(ybar)
        return dict(
            blocks=problem.x_blocks, layout=problem.x_layout, C=problem.A, d=problem.a,
            smooth=lambda w: c.value(w, ybar), grad=lambda w: c.grad_x(w, ybar),
            lip=c.L_x, hess=c.hess_xx, sign=1.0, const=const,
            value=lambda w: phi_value(problem, w, ybar), start=problem.x_feas,
        )
    if side == "max_y":
        xbar = as_flat(anchor, problem.dx)
        const = problem.h(xbar)
        lip = float(np.linalg.norm(c.hess_yy, 2)) if c.hess_yy is not None and c.hess_yy.size else c.L
        return dict(
            blocks=problem.y_blocks, layout=problem.y_layout, C=problem.B, d=problem.b,
            smooth=lambda w: -c.value(xbar, w), grad=lambda w: -c.grad_y(xbar, w),
            lip=lip, hess=None if c.hess_yy is None else -c.hess_yy, sign=-1.0, const=const,
            value=lambda w: phi_value(problem, xbar, w), start=problem.y_feas,
        )
    raise ValueError("side must be 'max_y' or 'min_x'")


def _block_prox_fn(blocks, layout, tol):
    def pfn(v, step):
        if not blocks:
            return v.copy()
        out = np.empty_like(v)
        for (s, t), sl in zip(blocks, layout.slices):
            out[sl] = prox(t, s, v[sl], step, tol)
        return out
    return pfn


def _box_quadratic(blocks, layout):
    """(lo, hi, diag, lin) if every block is a Box/Free with a Zero/Quadratic term."""
    lo, hi, dg, ln = [], [], [], []
    for s, t in blocks:
        if not isinstance(s, (Box, Free)) or not isinstance(t, (Zero, Quadratic)):
            return None
        b = s.bounds()
        lo.append(b[0]); hi.append(b[1])
        dg.append(t.diag if isinstance(t, Quadratic) else np.zeros(s.dim))
        ln.append(t.linear if isinstance(t, Quadratic) else np.zeros(s.dim))
    cat = lambda parts: np.concatenate(parts) if parts else np.zeros(0)
    return cat(lo), cat(hi), cat(dg), cat(ln)


def best_response(problem, side, anchor, tol=1e-8):
    """Exact inner optimization of one side with the other side fixed.

    side="min_x": min over {x in X, Ax = a} of Phi(x, anchor).
    side="max_y": max over {y in Y, By = b} of Phi(anchor, y).

    Augmented-Lagrangian outer loop; each inner problem is solved by
    accelerated proximal gradient (exactly, by an active-set polish, when the
    side is a box-constrained quadratic). The KKT residual is the norm of the
    projected-gradient displacement of the Lagrangian plus the constraint
    residual.

    Returns
    -------
    value : float
    point : ndarray
    kkt_residual : float
    """
    sd = _side_data(problem, side, anchor)
    blocks, layout, C, d = sd["blocks"], sd["layout"], sd["C"], sd["d"]
    dim = layout.total
    if dim == 0:
        w = np.zeros(0)
        return float(sd["value"](w)), w, 0.0
    pfn = _block_prox_fn(blocks, layout, tol * 1e-2)
    grad_s = sd["grad"]
    lip_s = max(float(sd["lip"]), 1.0)  # any upper bound works; avoid huge prox steps
    bq = _box_quadratic(blocks, layout) if sd["hess"] is not None else None
    H_s = sd["hess"]
    g0 = grad_s(np.zeros(dim)) if bq is not None else None
    rows = C.shape[0]
    nC = operator_norm(C) if rows else 0.0
    beta = 10.0 * max(lip_s, 1.0) / nC ** 2 if rows and nC > 0 else 0.0
    w = (sd["start"].copy() if sd["start"] is not None else pfn(np.zeros(dim), 1.0))
    nu = np.zeros(rows)

    def kkt(w, nu):
        gl = grad_s(w) - (C.T @ nu if rows else 0.0)
        disp = float(np.linalg.norm(w - pfn(w - gl, 1.0)))
        return disp + (float(np.linalg.norm(C @ w - d)) if rows else 0.0)

    best = None
    inner_tol = max(tol * 1e-2, 1e-14)
    beta_cap = beta * 1e6
    prev_feas = math.inf
    for outer in range(ALM_MAX_OUTER if rows else 1):
        shift = C.T @ nu + beta * (C.T @ d) if rows else 0.0
        grad = (lambda v, shift=shift: grad_s(v) - shift + beta * (C.T @ (C @ v))) if rows else grad_s
        lip = lip_s + beta * nC ** 2
        polish = None
        if bq is not None:
            lo, hi, dg, ln = bq
            H = H_s + np.diag(dg) + (beta * (C.T @ C) if rows else 0.0)
            cvec = g0 + ln - (shift if rows else 0.0)
            polish = lambda v, H=H, cvec=cvec: box_qp_polish(H, cvec, lo, hi, v)
        try:
            w, _ = minimize_composite(grad, lip, pfn, w, inner_tol, polish=polish, polish_every=20)
        except ProxError as exc:
            r = kkt(w, nu)
            raise CertificationError(f"best response inner solve failed: {exc}",
                                     float(sd["value"](w)), w, r) from exc
        if rows:
            cres = C @ w - d
            nu = nu - beta * cres
            feas = float(np.linalg.norm(cres))
            if feas > 0.25 * prev_feas and beta < beta_cap:
                beta *= 10.0  # slow outer progress: stiffen the penalty
            prev_feas = feas
        r = kkt(w, nu)
        if best is None or r < best[1]:
            best = (w.copy(), r)
        if r <= tol:
            return float(sd["value"](w)), w, r
    w, r = best
    raise CertificationError(f"best response did not reach tol={tol:g} (residual {r:.3e})",
                             float(sd["value"](w)), w, r)


def penalty_gap(problem, x_bar, y_bar, rho, tol=1e-8, strict=True):
    """br_max - br_min + rho ||A x_bar - a|| + rho ||B y_bar - b||.

    With ``strict=False`` a non-converged best response contributes its best
    value and the report is flagged ``converged=False``.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    x_bar = as_flat(x_bar, problem.dx)
    y_bar = as_flat(y_bar, problem.dy)
    converged = True
    out = []
    for side, anchor in (("max_y", x_bar), ("min_x", y_bar)):
        try:
            out.append(best_response(problem, side, anchor, tol))
        except CertificationError as exc:
            if strict:
                raise
            converged = False
            out.append((exc.value, exc.point, exc.residual))
    (vmax, ymax, kmax), (vmin, xmin, kmin) = out
    rx, ry = residuals(problem, x_bar, y_bar)
    gap = vmax - vmin + rho * rx + rho * ry
    return GapReport(vmax, vmin, rx, ry, float(rho), gap, kmax, kmin, tol, converged,
                     vmax - vmin + rx + ry, ymax.tolist(), xmin.tolist())


# ---------------------------------------------------------------------------
# Grid oracle
# ---------------------------------------------------------------------------

def _grid_side(problem, side, anchor, pts):
    blocks = problem.x_blocks if side == "min_x" else problem.y_blocks
    layout = problem.x_layout if side == "min_x" else problem.y_layout
    C = problem.A if side == "min_x" else problem.B
    d = problem.a if side == "min_x" else problem.b
    for s, _ in blocks:
        if not isinstance(s, (Box, Ball)):
            raise ValueError("grid oracle supports Box and Ball sets only")
    dim = layout.total
    if dim > 4:
        raise ValueError("grid oracle limited to total dimension 4 per side")
    lo = np.concatenate([s.bounds()[0] for s, _ in blocks]) if blocks else np.zeros(0)
    hi = np.concatenate([s.bounds()[1] for s, _ in blocks]) if blocks else np.zeros(0)
    rows = C.shape[0] if dim else 0
    elim, free, Cinv_free = None, list(range(dim)), None
    if rows:
        _, R, piv = _qr_pivot(C)
        if rows <= dim and abs(R[rows - 1, rows - 1]) > 1e-8 * abs(R[0, 0]):
            elim = list(piv[:rows])
            free = [j for j in range(dim) if j not in elim]
            Cp = C[:, elim]
            Cinv_free = np.linalg.solve(Cp, C[:, free]) if free else np.zeros((rows, 0))
            Cinv_d = np.linalg.solve(Cp, d)
    axes = [np.linspace(lo[j], hi[j], pts) for j in free]
    pitch = max(((hi[j] - lo[j]) / (pts - 1) for j in free), default=0.0)
    grid = np.array(list(itertools.product(*axes))) if free else np.zeros((1, 0))
    W = np.zeros((grid.shape[0], dim))
    if free:
        W[:, free] = grid
    tol_in = 1e-12
    if elim is not None:
        W[:, elim] = Cinv_d - grid @ Cinv_free.T
        keep = np.all((W >= lo - tol_in) & (W <= hi + tol_in), axis=1)
    elif rows:
        keep = np.linalg.norm(W @ C.T - d, axis=1) <= pitch
    else:
        keep = np.ones(len(W), dtype=bool)
    for (s, _), sl in zip(blocks, layout.slices):
        if isinstance(s, Ball):
            keep &= np.linalg.norm(W[:, sl] - s.center_, axis=1) <= s.radius + tol_in
    W = W[keep]
    if len(W) == 0:
        raise ValueError("no grid point survives the affine filter; refine the grid")
    c = problem.coupling
    if side == "min_x":
        ybar = np.broadcast_to(anchor, (len(W), problem.dy))
        vals = c.value(W, ybar) if problem.dy else np.array([c.value(w, anchor) for w in W])
        for (s, t), sl in zip(blocks, layout.slices):
            vals = vals + np.asarray(t.value(W[:, sl]))
        vals = vals - problem.g(anchor)
        k = int(np.argmin(vals))
    else:
        xbar = np.broadcast_to(anchor, (len(W), problem.dx))
        vals = c.value(xbar, W)
        for (s, t), sl in zip(blocks, layout.slices):
            vals = vals - np.asarray(t.value(W[:, sl]))
        vals = vals + problem.h(anchor)
        k = int(np.argmax(vals))
    # Lipschitz bound of the side objective over the grid (affine gradients
    # peak at box corners, which are grid points)
    lip = _grid_lipschitz(problem, side, anchor, W, blocks, layout)
    amp = 1.0 + (float(np.linalg.norm(Cinv_free, 2)) if Cinv_free is not None and Cinv_free.size else 0.0)
    err = lip * pitch * math.sqrt(max(len(free), 1)) * amp
    return float(vals[k]), W[k], err


def _qr_pivot(C):
    # Gram-Schmidt with column pivoting; C is tiny
    C = np.array(C, dtype=float)
    m, n = C.shape
    piv = list(range(n))
    R = np.zeros((m, n))
    Q = np.zeros((m, m))
    work = C.copy()
    for k in range(min(m, n)):
        norms = np.linalg.norm(work[:, k:], axis=0)
        j = k + int(np.argmax(norms))
        work[:, [k, j]] = work[:, [j, k]]
        piv[k], piv[j] = piv[j], piv[k]
        R[:, [k, j]] = R[:, [j, k]]
        v = work[:, k]
        R[k, k] = np.linalg.norm(v)
        if R[k, k] == 0:
            break
        q = v / R[k, k]
        Q[:, k] = q
        R[k, k + 1:] = q @ work[:, k + 1:]
        work[:, k + 1:] -= np.outer(q, R[k, k + 1:])
    return Q, R, piv


def _grid_lipschitz(problem, side, anchor, W, blocks, layout):
    c = problem.coupling
    G = np.empty_like(W)
    for i, w in enumerate(W):
        G[i] = c.grad_x(w, anchor) if side == "min_x" else -c.grad_y(anchor, w)
    slope = 0.0
    for (s, t), sl in zip(blocks, layout.slices):
        if isinstance(t, Quadratic):
            G[:, sl] += W[:, sl] * t.diag + t.linear
        elif isinstance(t, PiecewiseLinearMax):
            slope += t.subgrad_bound
        elif not isinstance(t, Zero):
            slope += float(np.abs(getattr(t, "weight", 0.0))) * math.sqrt(s.dim)
    return float(np.linalg.norm(G, axis=1).max(initial=0.0)) + slope


def brute_force_gap(problem, x_bar, y_bar, rho, grid_points_per_dim=41):
    """Penalty gap from grid enumeration of both restricted sets.

    Constraint rows are eliminated through a pivoted QR of the constraint
    matrix when it has full row rank; otherwise grid points are kept if
    their residual is below the grid pitch. ``error_bound`` is the sum over
    both sides of (Lipschitz bound) x (grid pitch) x sqrt(free dims),
    amplified by the elimination map.
    """
    if problem.dx > 4 or problem.dy > 4:
        raise ValueError("brute_force_gap is limited to total dimension 4 per side")
    x_bar = as_flat(x_bar, problem.dx)
    y_bar = as_flat(y_bar, problem.dy)
    vmax, ymax, emax = _grid_side(problem, "max_y", x_bar, grid_points_per_dim)
    vmin, xmin, emin = _grid_side(problem, "min_x", y_bar, grid_points_per_dim)
    rx, ry = residuals(problem, x_bar, y_bar)
    gap = vmax - vmin + rho * (rx + ry)
    return GapReport(vmax, vmin, rx, ry, float(rho), gap, 0.0, 0.0, 0.0, True,
                     vmax - vmin + rx + ry, ymax.tolist(), xmin.tolist(), emax + emin)


# ---------------------------------------------------------------------------
# One-step inequalities
# ---------------------------------------------------------------------------

def lemma3_slack(problem, snap, y):
    """Supergradient ascent step: RHS - LHS for comparator y in Y."""
    x1 = snap["state_k1"].x
    yk, yk1, u, sy = snap["y_k"], snap["y_k1"], snap["u_k"], snap["sigma_y"]
    lhs = phi_value(problem, x1, y) - phi_value(problem, x1, yk)
    rhs = 0.5 * sy * (np.sum((y - yk) ** 2) - np.sum((y - yk1) ** 2)) + np.sum(u ** 2) / (2 * sy)
    return float(rhs - lhs)


def lemma4_slack(problem, snap, y):
    """Extragradient ascent step: RHS - LHS for comparator y in Y."""
    xk, x1 = snap["state_k"].x, snap["state_k1"].x
    yk, yh, yk1, sy = snap["y_k"], snap["y_hat"], snap["y_k1"], snap["sigma_y"]
    Ly = problem.L_y
    lhs = phi_value(problem, x1, y) - phi_value(problem, x1, yh)
    rhs = (0.5 * sy * (np.sum((y - yk) ** 2) - np.sum((y - yk1) ** 2))
           + 0.5 * Ly * np.sum((xk - x1) ** 2)
           - 0.5 * (sy - Ly) * (np.sum((yh - yk) ** 2) + np.sum((yh - yk1) ** 2)))
    return float(rhs - lhs)


def egmm_G(problem, metric="theorem"):
    """Diagonal entries (gx, gy, glam, gmu) of the comparison metric G.

    "theorem" is Diag{(L+||A||)/2, (L+||B||)/2, ||A||/2, ||B||/2}; "safe" is
    twice that, the smallest diagonal metric for which the Young-inequality
    step bounding <F(z_hat) - F(z), z+ - z_hat> goes through.
    """
    f = 0.5 if metric == "theorem" else 1.0
    L, nA, nB = problem.L, problem.norm_A, problem.norm_B
    return f * (L + nA), f * (L + nB), f * nA, f * nB


def _F(problem, z):
    gx, gy = problem.coupling.grad(z.x, z.y)
    return (gx - problem.A.T @ z.lam, -gy - problem.B.T @ z.mu,
            problem.residual_x(z.x), problem.residual_y(z.y))


def _sqnorm_H(parts, weights):
    return sum(w * float(np.sum(p ** 2)) for p, w in zip(parts, weights))


def _diff(z1, z2):
    return (z1.x - z2.x, z1.y - z2.y, z1.lam - z2.lam, z1.mu - z2.mu)


def lemma5_slack(problem, snap, z, metric="theorem"):
    """EGMM step: RHS - LHS of
    R(z_hat) - R(z) + <F(z_hat), z_hat - z>
        <= 0.5||z_k - z||_H^2 - 0.5||z - z_k1||_H^2
           - 0.5||z_k - z_hat||_{H-G}^2 - 0.5||z_hat - z_k1||_{H-G}^2
    for a comparator z = (x in X, y in Y, lam, mu)."""
    zk, zh, z1, st = snap["z_k"], snap["z_hat"], snap["z_k1"], snap["steps"]
    H = (st.sigma_x or 0.0, st.sigma_y or 0.0, st.sigma_lam or 0.0, st.sigma_mu or 0.0)
    G = egmm_G(problem, metric)
    HG = tuple(h - g for h, g in zip(H, G))
    R = lambda q: problem.h(q.x) + problem.g(q.y)
    F = _F(problem, zh)
    dz = _diff(zh, z)
    lhs = R(zh) - R(z) + sum(float(f @ d) for f, d in zip(F, dz))
    rhs = (0.5 * _sqnorm_H(_diff(zk, z), H) - 0.5 * _sqnorm_H(_diff(z, z1), H)
           - 0.5 * _sqnorm_H(_diff(zk, zh), HG) - 0.5 * _sqnorm_H(_diff(zh, z1), HG))
    return float(rhs - lhs)


_EXPECTED = {
    "lemma2": ("ssg_admm", "seg_admm", "admm_min"),
    "lemma7": ("ssg_admm", "seg_admm", "admm_min"),
    "lemma3": ("ssg_admm",),
    "lemma4": ("seg_admm",),
    "lemma5": ("egmm",),
}


def sample_probes(problem, rng, count, lam_scale=10.0):
    """Feasible comparators and arbitrary multipliers for the lemma checks."""
    out = []
    for _ in range(count):
        x = problem.sample_feasible(rng, "x") if problem.x_feas is not None else problem.center_x()
        y = (problem.sample_feasible(rng, "y") if problem.m and problem.y_feas is not None
             else problem.project_y(problem.center_y() + rng.standard_normal(problem.dy) * 2.0))
        out.append({"x": x, "y": y,
                    "lam": lam_scale * rng.standard_normal(problem.n),
                    "mu": lam_scale * rng.standard_normal(problem.m)})
    return out


def check_step_inequality(kind, problem, snapshots, probes, metric="theorem"):
    """Minimum over snapshots x probes of RHS - LHS for the named inequality.

    Parameters
    ----------
    kind : {"lemma2", "lemma3", "lemma4", "lemma5", "lemma7"}
    snapshots : list of dict
        Step records passed to ``on_step`` by the matching solver.
    probes : list of dict
        Comparators with keys "x", "y", "lam", "mu".
    metric : {"theorem", "safe"}
        Comparison metric G for lemma5.
    """
    if kind not in _EXPECTED:
        raise ValueError(f"unknown inequality {kind!r}")
    worst = math.inf
    from .solvers import Iterate
    for snap in snapshots:
        if snap["algorithm"] not in _EXPECTED[kind]:
            raise ValueError(f"{kind} needs snapshots from {_EXPECTED[kind]}, got {snap['algorithm']!r}")
        for pr in probes:
            if kind == "lemma2":
                s = lemma2_slack(problem, snap["state_k"], snap["state_k1"], snap["y_tilde"], pr["x"], pr["lam"])
            elif kind == "lemma7":
                s = lemmaN_slack(problem, snap["state_k"], snap["state_k1"], snap["y_tilde"], pr["x"], pr["lam"])
            elif kind == "lemma3":
                s = lemma3_slack(problem, snap, pr["y"])
            elif kind == "lemma4":
                s = lemma4_slack(problem, snap, pr["y"])
            else:
                z = Iterate(pr["x"], pr["y"], pr["lam"], pr["mu"])
                s = lemma5_slack(problem, snap, z, metric)
            worst = min(worst, s)
    return worst
