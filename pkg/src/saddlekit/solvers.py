"""Top-level algorithms: SSG-ADMM, SEG-ADMM, EGMM, plain proximal ADMM for
minimization, the perturbed multi-block variants, default step sizes and the
matching theoretical bounds.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .admm import AdmmState, prox_admm_step, strong_convexity_gamma
from .linalg import Zero, prox
from .problem import as_flat, perturb, supergrad_y

__all__ = [
    "RunConfig", "StepSizes", "Iterate", "Trace", "Constants", "SolverError",
    "default_stepsizes", "run_ssg_admm", "run_seg_admm", "run_egmm", "run_admm_min",
    "run_perturbed", "run", "theoretical_bound", "ALGORITHMS", "TRACE_COLUMNS",
]

ALGORITHMS = ("ssg_admm", "seg_admm", "egmm", "admm_min")
TRACE_COLUMNS = ("iter", "res_x", "res_y", "dx_norm", "dy_norm", "gap", "wall_ms")
AUTO = "auto"


class SolverError(RuntimeError):
    """Missing constants, unsupported problem shape or failed inner solve."""


@dataclass
class RunConfig:
    """Algorithm choice, budget and step sizes ("auto" or a positive number).

    ``egmm_metric`` selects the EGMM step rule: "theorem" uses
    sigma = (L+||A||)/2, ... as stated by the convergence theorem; "safe"
    doubles every entry, which is what the one-step inequality needs.
    """

    algorithm: str = "egmm"
    T: int = 100
    gamma: object = AUTO
    sigma_x: object = AUTO
    sigma_y: object = AUTO
    sigma_lam: object = AUTO
    sigma_mu: object = AUTO
    rho_report: float = 10.0
    eps: float = 0.0
    gap_eval_every: int = 0
    inner_tol: float = 1e-10
    seed: int = 0
    egmm_metric: str = "theorem"
    store_iterates: bool = False
    timing: bool = False
    final_gap: bool = False
    gap_tol: float = 1e-8
    x0: object = None
    y0: object = None
    lam0: object = None
    mu0: object = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if int(self.T) < 1:
            raise ValueError("T must be >= 1")
        self.T = int(self.T)
        for name in ("gamma", "sigma_x", "sigma_y", "sigma_lam", "sigma_mu"):
            v = getattr(self, name)
            if v is None or v == AUTO:
                setattr(self, name, AUTO)
                continue
            v = float(v)
            floor_ok = name == "sigma_x" and self.algorithm in ("admm_min", "ssg_admm", "seg_admm")
            if v < 0 or (v == 0 and not floor_ok):
                raise ValueError(f"{name} must be positive")
            setattr(self, name, v)
        if self.egmm_metric not in ("theorem", "safe"):
            raise ValueError("egmm_metric must be 'theorem' or 'safe'")
        if self.rho_report <= 0:
            raise ValueError("rho_report must be positive")

    def to_dict(self):
        d = asdict(self)
        for k in ("x0", "y0", "lam0", "mu0"):
            if d[k] is not None:
                d[k] = np.asarray(d[k], dtype=float).tolist()
        return d


@dataclass
class StepSizes:
    gamma: float = None
    sigma_x: float = None
    sigma_y: float = None
    sigma_lam: float = None
    sigma_mu: float = None

    def to_dict(self):
        return asdict(self)


@dataclass
class Iterate:
    """Joint point z = (x, y, lam, mu)."""

    x: np.ndarray
    y: np.ndarray
    lam: np.ndarray
    mu: np.ndarray

    def copy(self):
        return Iterate(self.x.copy(), self.y.copy(), self.lam.copy(), self.mu.copy())


@dataclass
class Trace:
    """Per-iteration records and averaged outputs of one run."""

    algorithm: str
    steps: StepSizes
    rows: list = field(default_factory=list)
    x_bar: np.ndarray = None
    y_bar: np.ndarray = None
    x_stream: list = None
    y_stream: list = None
    final: Iterate = None
    final_gap: dict = None
    extra: dict = field(default_factory=dict)

    def column(self, name):
        i = TRACE_COLUMNS.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.rows:
            w.writerow([r[0]] + [repr(float(v)) for v in r[1:]])
        return buf.getvalue()

    def to_dict(self):
        return {
            "algorithm": self.algorithm,
            "steps": self.steps.to_dict(),
            "columns": list(TRACE_COLUMNS),
            "rows": [[r[0]] + [None if math.isnan(v) else float(v) for v in r[1:]] for r in self.rows],
            "x_bar": None if self.x_bar is None else self.x_bar.tolist(),
            "y_bar": None if self.y_bar is None else self.y_bar.tolist(),
            "final_gap": self.final_gap,
            "extra": self.extra,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


# ---------------------------------------------------------------------------
# Constants and bounds
# ---------------------------------------------------------------------------

@dataclass
class Constants:
    """Problem constants entering the step-size rules and bounds."""

    L: float = 0.0
    L_x: float = 0.0
    L_y: float = None
    ell: float = None
    norm_A: float = 0.0
    norm_B: float = 0.0
    norm_A2: float = 0.0
    D_X: float = 0.0
    D_Y: float = 0.0
    D_X2: float = 0.0
    N: int = 2

    @classmethod
    def of(cls, problem):
        # non-compact sets give infinite diameters; rules that need them reject those
        def diam(f):
            try:
                return f()
            except ValueError:
                return math.inf

        return cls(
            L=problem.L, L_x=problem.L_x, L_y=problem.L_y, ell=problem.ell,
            norm_A=problem.norm_A, norm_B=problem.norm_B,
            norm_A2=problem.block_norms_A[1] if problem.N >= 2 else 0.0,
            D_X=diam(lambda: problem.D_X), D_Y=diam(lambda: problem.D_Y),
            D_X2=diam(lambda: problem.x_diameters[1]) if problem.N >= 2 else 0.0, N=problem.N,
        )


def _require_finite(c, *names):
    for n in names:
        if not math.isfinite(getattr(c, n)):
            raise SolverError(f"{n} is infinite (non-compact set); pass step sizes explicitly")


def _constants(problem_or_constants):
    if isinstance(problem_or_constants, Constants):
        return problem_or_constants
    try:
        return Constants.of(problem_or_constants)
    except ValueError as exc:
        raise SolverError(str(exc)) from exc


def default_gamma(c, rho):
    """Minimizer over gamma of rho^2/gamma + gamma ||A_2||^2 D_{X_2}^2."""
    _require_finite(c, "D_X2")
    if c.norm_A2 * c.D_X2 == 0:
        raise SolverError("gamma rule needs a nonzero ||A_2|| * D_X2; pass gamma explicitly")
    return rho / (c.norm_A2 * c.D_X2)


def theoretical_bound(theorem, problem, T, rho, gamma=None, metric="theorem"):
    """Right-hand side of the ergodic convergence bound.

    ``theorem`` selects the algorithm: 1 = SSG-ADMM, 2 = SEG-ADMM, 3 = EGMM.

    Parameters
    ----------
    problem : SaddleProblem or Constants
    gamma : float, optional
        Penalty used by an ADMM-based run; defaults to the
        gap-balancing value.
    metric : {"theorem", "safe"}
        For EGMM, the step rule the run used.
    """
    c = _constants(problem)
    T = float(T)
    _require_finite(c, "D_X", "D_Y")
    if theorem in (1, 2):
        if c.N != 2:
            raise SolverError("the ADMM-based bounds hold for N = 2")
        g = default_gamma(c, rho) if gamma is None else float(gamma)
        common = rho ** 2 / g + g * c.norm_A2 ** 2 * c.D_X2 ** 2
        if theorem == 1:
            if c.ell is None:
                raise SolverError("the SSG-ADMM bound needs the supergradient bound ell")
            return (common + c.L_x * c.D_X ** 2) / (2 * T) + c.D_Y * c.ell / math.sqrt(T)
        if c.L_y is None:
            raise SolverError("the SEG-ADMM bound needs L_y")
        return (common + (c.L_x + c.L_y) * c.D_X ** 2 + c.L_y * c.D_Y ** 2) / (2 * T)
    if theorem == 3:
        if metric == "theorem":
            return ((c.L + c.norm_A) * c.D_X ** 2 / (4 * T) + (c.L + c.norm_B) * c.D_Y ** 2 / (4 * T)
                    + (c.norm_A + c.norm_B) * rho ** 2 / (2 * T))
        if metric == "safe":
            return ((c.L + c.norm_A) * c.D_X ** 2 + (c.L + c.norm_B) * c.D_Y ** 2
                    + (c.norm_A + c.norm_B) * rho ** 2) / (2 * T)
        raise ValueError(f"unknown metric {metric!r}")
    raise ValueError("theorem must be 1, 2 or 3")


def default_stepsizes(problem, algorithm, T, rho=10.0, metric="theorem"):
    """Step sizes of the convergence guarantees.

    ssg_admm: sigma_x = L_x, sigma_y = sqrt(T) ell / D_Y.
    seg_admm: sigma_x = L_x + L_y, sigma_y = L_y.
    egmm: sigma_x = (L+||A||)/2, sigma_y = (L+||B||)/2, sigma_lam = ||A||/2,
    sigma_mu = ||B||/2 (all doubled for metric="safe").
    admm_min: sigma = L_x.
    gamma (ADMM variants): rho / (||A_2|| D_X2) for N = 2; for N >= 3 the
    strong-convexity rule 1/(N(N-1)) min mu_i/||A_i||^2.
    """
    c = _constants(problem) if not isinstance(problem, Constants) else problem
    st = StepSizes()
    if algorithm == "egmm":
        f = 1.0 if metric == "theorem" else 2.0
        st.sigma_x = f * (c.L + c.norm_A) / 2
        st.sigma_y = f * (c.L + c.norm_B) / 2
        st.sigma_lam = f * c.norm_A / 2
        st.sigma_mu = f * c.norm_B / 2
        return st
    if algorithm == "ssg_admm":
        if c.ell is None:
            raise SolverError("ssg_admm auto steps need the supergradient bound ell")
        st.sigma_x = c.L_x
        _require_finite(c, "D_Y")
        st.sigma_y = math.sqrt(T) * c.ell / c.D_Y if c.D_Y > 0 else None
    elif algorithm == "seg_admm":
        if c.L_y is None:
            raise SolverError("seg_admm needs a smooth y-side (L_y)")
        st.sigma_x = c.L_x + c.L_y
        st.sigma_y = c.L_y
    elif algorithm == "admm_min":
        st.sigma_x = c.L_x
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if isinstance(problem, Constants):
        ok = c.norm_A2 * c.D_X2 > 0 and math.isfinite(c.D_X2)
        st.gamma = default_gamma(c, rho) if ok else None
    elif problem.N == 2 and algorithm == "admm_min" and not math.isfinite(c.D_X2):
        st.gamma = 1.0 / problem.norm_A if problem.norm_A > 0 else 1.0
    elif problem.N == 2:
        st.gamma = default_gamma(c, rho)
    elif problem.N >= 3:
        mu = problem.mu
        if all(m > 0 for m in mu[1:]):
            st.gamma = strong_convexity_gamma(mu, problem.block_norms_A)
        else:
            st.gamma = None  # no rule without strong convexity; caller must supply
    else:
        st.gamma = 1.0 / problem.norm_A if problem.norm_A > 0 else 1.0
    return st


def _resolve_steps(problem, config):
    auto = default_stepsizes(problem, config.algorithm, config.T, config.rho_report,
                             config.egmm_metric) if _needs_auto(config) else StepSizes()
    st = StepSizes()
    for name in ("gamma", "sigma_x", "sigma_y", "sigma_lam", "sigma_mu"):
        v = getattr(config, name)
        setattr(st, name, getattr(auto, name) if v == AUTO else v)
    return st


def _needs_auto(config):
    return any(getattr(config, n) == AUTO for n in ("gamma", "sigma_x", "sigma_y", "sigma_lam", "sigma_mu"))


def _start(problem, config):
    x0 = problem.center_x() if config.x0 is None else as_flat(config.x0, problem.dx)
    y0 = problem.center_y() if config.y0 is None else as_flat(config.y0, problem.dy)
    return problem.project_x(x0), problem.project_y(y0)


def _start_multipliers(problem, config):
    lam = np.zeros(problem.n) if config.lam0 is None else as_flat(config.lam0, problem.n)
    mu = np.zeros(problem.m) if config.mu0 is None else as_flat(config.mu0, problem.m)
    return lam, mu


# ---------------------------------------------------------------------------
# Recording helpers
# ---------------------------------------------------------------------------

class _Recorder:
    def __init__(self, problem, config, steps, algorithm, gap_problem=None):
        self.p = problem
        self.gp = problem if gap_problem is None else gap_problem
        self.cfg = config
        self.trace = Trace(algorithm, steps)
        self.sx = np.zeros(problem.dx)
        self.sy = np.zeros(problem.dy)
        self.count = 0
        if config.store_iterates:
            self.trace.x_stream, self.trace.y_stream = [], []
        self.t0 = time.perf_counter()

    def push(self, k, x_out, y_out, dx, dy):
        self.sx += x_out
        self.sy += y_out
        self.count += 1
        if self.cfg.store_iterates:
            self.trace.x_stream.append(x_out.copy())
            self.trace.y_stream.append(y_out.copy())
        res_x = float(np.linalg.norm(self.p.residual_x(x_out))) if self.p.n else 0.0
        res_y = float(np.linalg.norm(self.p.residual_y(y_out))) if self.p.m else 0.0
        gap = float("nan")
        every = self.cfg.gap_eval_every
        if every and k % every == 0:
            from .certify import penalty_gap
            rep = penalty_gap(self.gp, self.sx / self.count, self.sy / self.count,
                              self.cfg.rho_report, tol=1e-6, strict=False)
            gap = rep.penalty_gap
        wall = (time.perf_counter() - self.t0) * 1e3 if self.cfg.timing else float("nan")
        self.trace.rows.append((k, res_x, res_y, float(dx), float(dy), gap, wall))

    def finish(self, final):
        tr = self.trace
        tr.x_bar = self.sx / self.count
        tr.y_bar = self.sy / self.count
        tr.final = final
        if self.cfg.final_gap:
            from .certify import penalty_gap
            rep = penalty_gap(self.gp, tr.x_bar, tr.y_bar, self.cfg.rho_report,
                              tol=self.cfg.gap_tol, strict=False)
            tr.final_gap = rep.to_dict()
        return tr


def _check_finite(*arrays):
    for v in arrays:
        if not np.all(np.isfinite(v)):
            raise SolverError("iterates became non-finite")


# ---------------------------------------------------------------------------
# Algorithms
# ---------------------------------------------------------------------------

def _admm_common(problem, config, name):
    if problem.m != 0:
        raise SolverError(f"{name} handles one-sided problems only (m = 0)")
    if problem.n < 1:
        raise SolverError(f"{name} needs at least one x-constraint row")
    steps = _resolve_steps(problem, config)
    if steps.gamma is None:
        raise SolverError("no default gamma for N >= 3 without strong convexity; "
                          "pass gamma or use run_perturbed")
    if problem.dy and (steps.sigma_y is None or steps.sigma_y <= 0):
        raise SolverError("sigma_y must be positive")
    return steps


def run_ssg_admm(problem, config, on_step=None, _gap_problem=None):
    """Prox-ADMM on x followed by a projected supergradient step on y.

    Returns
    -------
    x_bar : mean of x^1..x^T
    y_bar : mean of y^0..y^{T-1}
    trace : Trace
    """
    steps = _admm_common(problem, config, "ssg_admm")
    x, y = _start(problem, config)
    lam, _ = _start_multipliers(problem, config)
    state = AdmmState(x, lam, steps.gamma, steps.sigma_x)
    rec = _Recorder(problem, config, steps, "ssg_admm", _gap_problem)
    for k in range(config.T):
        new = prox_admm_step(problem, state, y, config.inner_tol)
        u = supergrad_y(problem, new.x, y) if problem.dy else np.zeros(0)
        y_new = problem.project_y(y + u / steps.sigma_y) if problem.dy else y
        _check_finite(new.x, y_new)
        rec.push(k + 1, new.x, y, np.linalg.norm(new.x - state.x), np.linalg.norm(y_new - y))
        if on_step is not None:
            on_step({"algorithm": "ssg_admm", "k": k, "state_k": state, "state_k1": new,
                     "y_k": y, "y_k1": y_new, "u_k": u, "sigma_y": steps.sigma_y,
                     "y_tilde": y})
        state, y = new, y_new
    tr = rec.finish(Iterate(state.x, y, state.lam, np.zeros(0)))
    return tr.x_bar, tr.y_bar, tr


def run_seg_admm(problem, config, on_step=None, _gap_problem=None):
    """Extragradient on y around a Prox-ADMM step on x.

    Returns
    -------
    x_bar : mean of x^1..x^T
    y_bar : mean of the extrapolated points y_hat^1..y_hat^T
    trace : Trace
    """
    if not problem.smooth_in_y:
        raise SolverError("seg_admm needs a smooth y-side")
    steps = _admm_common(problem, config, "seg_admm")
    x, y = _start(problem, config)
    lam, _ = _start_multipliers(problem, config)
    state = AdmmState(x, lam, steps.gamma, steps.sigma_x)
    rec = _Recorder(problem, config, steps, "seg_admm", _gap_problem)
    has_y = problem.dy > 0
    for k in range(config.T):
        if has_y:
            y_hat = problem.project_y(y + supergrad_y(problem, state.x, y) / steps.sigma_y)
        else:
            y_hat = y
        new = prox_admm_step(problem, state, y_hat, config.inner_tol)
        if has_y:
            y_new = problem.project_y(y + supergrad_y(problem, new.x, y_hat) / steps.sigma_y)
        else:
            y_new = y
        _check_finite(new.x, y_new)
        rec.push(k + 1, new.x, y_hat, np.linalg.norm(new.x - state.x), np.linalg.norm(y_new - y))
        if on_step is not None:
            on_step({"algorithm": "seg_admm", "k": k, "state_k": state, "state_k1": new,
                     "y_k": y, "y_hat": y_hat, "y_k1": y_new, "sigma_y": steps.sigma_y,
                     "y_tilde": y_hat})
        state, y = new, y_new
    tr = rec.finish(Iterate(state.x, y, state.lam, np.zeros(0)))
    return tr.x_bar, tr.y_bar, tr


def _block_prox(blocks, layout, v, step, tol):
    if not blocks:
        return v.copy()
    out = np.empty_like(v)
    for (s, t), sl in zip(blocks, layout.slices):
        out[sl] = prox(t, s, v[sl], step, tol)
    return out


def egmm_half_step(problem, z, z_eval, steps, tol):
    """prox_{R,H}(z - H^{-1} F(z_eval)) with F = (grad_x Psi - A'lam,
    -grad_y Psi - B'mu, A x - a, B y - b) evaluated at `z_eval`."""
    p = problem
    gx, gy = p.coupling.grad(z_eval.x, z_eval.y)
    vx = z.x - (gx - p.A.T @ z_eval.lam) / steps.sigma_x
    x = _block_prox(p.x_blocks, p.x_layout, vx, 1.0 / steps.sigma_x, tol)
    if p.dy:
        vy = z.y + (gy + p.B.T @ z_eval.mu) / steps.sigma_y
        y = _block_prox(p.y_blocks, p.y_layout, vy, 1.0 / steps.sigma_y, tol)
    else:
        y = z.y.copy()
    lam = z.lam - p.residual_x(z_eval.x) / steps.sigma_lam if p.n else z.lam.copy()
    mu = z.mu - p.residual_y(z_eval.y) / steps.sigma_mu if p.m else z.mu.copy()
    return Iterate(x, y, lam, mu)


def run_egmm(problem, config, on_step=None):
    """Extragradient method of multipliers with diagonal metric H.

    Returns
    -------
    x_bar, y_bar : means of the half-step points x_hat^1..x_hat^T, y_hat^1..y_hat^T
    trace : Trace
    """
    steps = _resolve_steps(problem, config)
    for name, need in (("sigma_x", problem.dx), ("sigma_y", problem.dy),
                       ("sigma_lam", problem.n), ("sigma_mu", problem.m)):
        v = getattr(steps, name)
        if need and (v is None or v <= 0):
            raise SolverError(f"{name} must be positive (got {v})")
    x, y = _start(problem, config)
    z = Iterate(x, y, *_start_multipliers(problem, config))
    rec = _Recorder(problem, config, steps, "egmm")
    tol = config.inner_tol
    for k in range(config.T):
        z_hat = egmm_half_step(problem, z, z, steps, tol)
        z_new = egmm_half_step(problem, z, z_hat, steps, tol)
        _check_finite(z_new.x, z_new.y, z_new.lam, z_new.mu)
        rec.push(k + 1, z_hat.x, z_hat.y, np.linalg.norm(z_new.x - z.x), np.linalg.norm(z_new.y - z.y))
        if on_step is not None:
            on_step({"algorithm": "egmm", "k": k, "z_k": z, "z_hat": z_hat, "z_k1": z_new,
                     "steps": steps})
        z = z_new
    tr = rec.finish(z.copy())
    return tr.x_bar, tr.y_bar, tr


def _y_inert(problem):
    c = problem.coupling
    if c.cross is None or c.hess_yy is None:
        return False
    return (not np.any(c.cross) and not np.any(c.hess_yy)
            and all(isinstance(t, Zero) for _, t in problem.y_blocks))


def run_admm_min(problem, config, on_step=None):
    """Plain proximal ADMM for problems with no y-dependence.

    Returns
    -------
    x_bar : mean of x^1..x^T
    trace : Trace
    """
    if problem.m != 0 or (problem.dy and not _y_inert(problem)):
        raise SolverError("admm_min needs a problem without y-dependence")
    config = replace(config, algorithm="admm_min")
    steps = _resolve_steps(problem, config)
    if steps.gamma is None:
        if problem.norm_A == 0:
            raise SolverError("cannot pick gamma for a zero constraint matrix")
        steps.gamma = 1.0 / problem.norm_A
    x, y = _start(problem, config)
    state = AdmmState(x, _start_multipliers(problem, config)[0], steps.gamma, steps.sigma_x)
    rec = _Recorder(problem, config, steps, "admm_min")
    for k in range(config.T):
        new = prox_admm_step(problem, state, y, config.inner_tol)
        _check_finite(new.x, new.lam)
        rec.push(k + 1, new.x, y, np.linalg.norm(new.x - state.x), 0.0)
        if on_step is not None:
            on_step({"algorithm": "admm_min", "k": k, "state_k": state, "state_k1": new,
                     "y_tilde": y})
        state = new
    tr = rec.finish(Iterate(state.x, y, state.lam, np.zeros(0)))
    return tr.x_bar, tr


def perturbed_setup(problem, T, c=1.0):
    """eps = c / sqrt(T) and gamma = eps / (N(N-1) max_{i>=2} ||A_i||^2)."""
    eps = c / math.sqrt(T)
    N = problem.N
    amax = max(nrm ** 2 for nrm in problem.block_norms_A[1:])
    if amax == 0:
        raise SolverError("blocks i >= 2 have zero constraint matrices")
    return eps, eps / (N * (N - 1) * amax)


def run_perturbed(variant, problem, config, c=1.0, on_step=None):
    """SEG- or SSG-ADMM on the eps-perturbed problem with the perturbed penalty rule.

    The perturbation adds (eps/2) ||x_i - x_i^0||^2 to h_i for i >= 2, with
    x^0 the run's starting point. Gap snapshots refer to the original problem.
    """
    if variant not in ("seg", "ssg"):
        raise ValueError("variant must be 'seg' or 'ssg'")
    if problem.N < 3:
        raise SolverError("run_perturbed is for N >= 3; use the plain variant")
    eps, gamma = perturbed_setup(problem, config.T, c)
    if config.eps:
        eps = float(config.eps)
        gamma = eps / (problem.N * (problem.N - 1) * max(n ** 2 for n in problem.block_norms_A[1:]))
    x0, _ = _start(problem, config)
    pert = perturb(problem, eps, x0)
    algo = "seg_admm" if variant == "seg" else "ssg_admm"
    cfg = replace(config, algorithm=algo, gamma=gamma if config.gamma == AUTO else config.gamma)
    runner = run_seg_admm if variant == "seg" else run_ssg_admm
    xb, yb, tr = runner(pert, cfg, on_step=on_step, _gap_problem=problem)
    tr.extra.update({"eps": eps, "gamma": cfg.gamma, "variant": variant})
    return xb, yb, tr


def run(problem, config, on_step=None):
    """Dispatch on ``config.algorithm``; always returns (x_bar, y_bar, trace).

    A positive ``config.eps`` with an ADMM variant on N >= 3 selects the
    perturbed run.
    """
    a = config.algorithm
    if a == "egmm":
        return run_egmm(problem, config, on_step)
    if a == "admm_min":
        xb, tr = run_admm_min(problem, config, on_step)
        return xb, tr.y_bar, tr
    if config.eps and problem.N >= 3:
        return run_perturbed("seg" if a == "seg_admm" else "ssg", problem, config, on_step=on_step)
    if a == "seg_admm":
        return run_seg_admm(problem, config, on_step)
    return run_ssg_admm(problem, config, on_step)
