"""Dense kernels: feasible-set projections, separable proximal maps, block
vectors and spectral-norm estimation.

Every set and term is a small frozen dataclass. The module-level functions
`project`, `prox`, `diameter` and `operator_norm` are the entry points used
by the solvers; the methods on the classes do the actual work.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "Box", "Ball", "Simplex", "NonnegBall", "Free", "ConvexSet",
    "Zero", "Quadratic", "ScaledL1", "PiecewiseLinearMax", "Ridged",
    "SeparableTerm", "BlockVector", "BlockLayout",
    "project", "prox", "diameter", "operator_norm",
    "ProxError", "set_from_dict", "term_from_dict",
]

PROX_MAX_ITER = 50_000
POWER_MAX_ITER = 10_000


class ProxError(RuntimeError):
    """An inner proximal/subproblem loop hit its iteration cap."""


def _vec(v, dim=None, what="vector"):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{what} must be one-dimensional, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"dimension mismatch: {what} has length {v.shape[0]}, expected {dim}")
    return v


# ---------------------------------------------------------------------------
# Convex sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = _vec(self.lo, what="lo")
        hi = _vec(self.hi, len(lo), what="hi")
        if np.any(lo > hi):
            raise ValueError("Box requires lo <= hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def uniform(cls, dim, lo=-1.0, hi=1.0):
        return cls(np.full(dim, float(lo)), np.full(dim, float(hi)))

    @property
    def dim(self):
        return self.lo.shape[0]

    compact = True

    def project(self, v):
        return np.clip(v, self.lo, self.hi)

    def diameter(self):
        return float(np.linalg.norm(self.hi - self.lo))

    def max_norm(self):
        return float(np.linalg.norm(np.maximum(np.abs(self.lo), np.abs(self.hi))))

    def center(self):
        return 0.5 * (self.lo + self.hi)

    def contains(self, v, tol=1e-12):
        return bool(np.all(v >= self.lo - tol) and np.all(v <= self.hi + tol))

    def bounds(self):
        return self.lo, self.hi

    def to_dict(self):
        return {"kind": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


def _shrink_into(center, d, radius):
    # rounding can leave c + d a hair outside the ball; shrink until the
    # membership test used by project() passes, so projection is idempotent
    w = center + d
    while np.linalg.norm(w - center) > radius:
        d = d * (1.0 - 2.0 ** -52)
        w = center + d
    return w


@dataclass(frozen=True, eq=False)
class Ball:
    center_: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center_", _vec(self.center_, what="center"))
        if not self.radius >= 0:
            raise ValueError("Ball radius must be nonnegative")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self):
        return self.center_.shape[0]

    compact = True

    def project(self, v):
        d = v - self.center_
        nrm = np.linalg.norm(d)
        if nrm <= self.radius:
            return v.copy()
        return _shrink_into(self.center_, d * (self.radius / nrm), self.radius)

    def diameter(self):
        return 2.0 * self.radius

    def max_norm(self):
        return float(np.linalg.norm(self.center_)) + self.radius

    def center(self):
        return self.center_.copy()

    def contains(self, v, tol=1e-12):
        return bool(np.linalg.norm(v - self.center_) <= self.radius + tol)

    def bounds(self):
        return self.center_ - self.radius, self.center_ + self.radius

    def to_dict(self):
        return {"kind": "ball", "center": self.center_.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Simplex:
    """Probability simplex {w >= 0, sum(w) = 1}."""

    dim_: int

    @property
    def dim(self):
        return self.dim_

    compact = True

    def project(self, v):
        # sort-and-threshold; equal components on the threshold are all kept
        # points already on the simplex up to rounding are returned as is,
        # and the result is re-projected until it is such a point, so that
        # projection is exactly idempotent
        w = v
        for _ in range(8):
            if np.all(w >= 0) and abs(w.sum() - 1.0) <= 4 * len(w) * np.finfo(float).eps:
                return w.copy()
            u = np.sort(w)[::-1]
            css = np.cumsum(u) - 1.0
            ks = np.arange(1, len(w) + 1)
            rho = np.nonzero(u - css / ks > 0)[0][-1]
            theta = css[rho] / (rho + 1.0)
            w = np.maximum(w - theta, 0.0)
        return w

    def diameter(self):
        return float(np.sqrt(2.0)) if self.dim_ >= 2 else 0.0

    def max_norm(self):
        return 1.0

    def center(self):
        return np.full(self.dim_, 1.0 / self.dim_)

    def contains(self, v, tol=1e-12):
        return bool(np.all(v >= -tol) and abs(v.sum() - 1.0) <= tol * max(1, self.dim_))

    def bounds(self):
        return np.zeros(self.dim_), np.ones(self.dim_)

    def to_dict(self):
        return {"kind": "simplex", "dim": self.dim_}


@dataclass(frozen=True, eq=False)
class NonnegBall:
    """Nonnegative orthant intersected with the centered ball of given radius."""

    dim_: int
    radius: float

    def __post_init__(self):
        if not self.radius >= 0:
            raise ValueError("NonnegBall radius must be nonnegative")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self):
        return self.dim_

    compact = True

    def project(self, v):
        # clip-then-scale is exact for a cone intersected with a centered ball
        w = np.maximum(v, 0.0)
        nrm = np.linalg.norm(w)
        if nrm > self.radius:
            w = _shrink_into(np.zeros_like(w), w * (self.radius / nrm), self.radius)
        return w

    def diameter(self):
        return self.radius * (float(np.sqrt(2.0)) if self.dim_ >= 2 else 1.0)

    def max_norm(self):
        return self.radius

    def center(self):
        return np.full(self.dim_, self.radius / (2.0 * np.sqrt(self.dim_)))

    def contains(self, v, tol=1e-12):
        return bool(np.all(v >= -tol) and np.linalg.norm(v) <= self.radius + tol)

    def bounds(self):
        return np.zeros(self.dim_), np.full(self.dim_, self.radius)

    def to_dict(self):
        return {"kind": "nonneg_ball", "dim": self.dim_, "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Free:
    dim_: int

    @property
    def dim(self):
        return self.dim_

    compact = False

    def project(self, v):
        return v.copy()

    def diameter(self):
        raise ValueError("non-compact set has no diameter")

    def max_norm(self):
        return float("inf")

    def center(self):
        return np.zeros(self.dim_)

    def contains(self, v, tol=0.0):
        return bool(np.all(np.isfinite(v)))

    def bounds(self):
        return np.full(self.dim_, -np.inf), np.full(self.dim_, np.inf)

    def to_dict(self):
        return {"kind": "free", "dim": self.dim_}


ConvexSet = Box | Ball | Simplex | NonnegBall | Free


def set_from_dict(d):
    kind = d["kind"]
    if kind == "box":
        return Box(np.array(d["lo"], dtype=float), np.array(d["hi"], dtype=float))
    if kind == "ball":
        return Ball(np.array(d["center"], dtype=float), d["radius"])
    if kind == "simplex":
        return Simplex(int(d["dim"]))
    if kind == "nonneg_ball":
        return NonnegBall(int(d["dim"]), d["radius"])
    if kind == "free":
        return Free(int(d["dim"]))
    raise ValueError(f"unknown set kind {kind!r}")


def project(cset, v):
    """Euclidean projection of `v` onto `cset`."""
    v = _vec(v, cset.dim)
    return cset.project(v)


def diameter(cset):
    return cset.diameter()


# ---------------------------------------------------------------------------
# Separable terms
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Zero:
    smooth = True

    def value(self, w):
        w = np.asarray(w, dtype=float)
        return np.zeros(w.shape[:-1]) if w.ndim > 1 else 0.0

    def grad(self, w):
        return np.zeros_like(np.asarray(w, dtype=float))

    subgrad = grad

    @property
    def strong_convexity(self):
        return 0.0

    @property
    def curvature(self):
        return 0.0

    def to_dict(self):
        return {"kind": "zero"}


@dataclass(frozen=True, eq=False)
class Quadratic:
    """0.5 * sum(diag * w**2) + linear @ w + const."""

    diag: np.ndarray
    linear: np.ndarray
    const: float = 0.0

    def __post_init__(self):
        diag = _vec(self.diag, what="diag")
        lin = _vec(self.linear, len(diag), what="linear")
        if np.any(diag < 0):
            raise ValueError("Quadratic diag entries must be nonnegative")
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "const", float(self.const))

    smooth = True

    def value(self, w):
        w = np.asarray(w, dtype=float)
        return 0.5 * (self.diag * w * w).sum(-1) + w @ self.linear + self.const

    def grad(self, w):
        return self.diag * w + self.linear

    subgrad = grad

    @property
    def strong_convexity(self):
        return float(self.diag.min()) if self.diag.size else 0.0

    @property
    def curvature(self):
        return float(self.diag.max()) if self.diag.size else 0.0

    def to_dict(self):
        return {"kind": "quadratic", "diag": self.diag.tolist(),
                "linear": self.linear.tolist(), "const": self.const}


@dataclass(frozen=True, eq=False)
class ScaledL1:
    weight: float

    def __post_init__(self):
        if not self.weight >= 0:
            raise ValueError("ScaledL1 weight must be nonnegative")
        object.__setattr__(self, "weight", float(self.weight))

    smooth = False

    def value(self, w):
        return self.weight * np.abs(np.asarray(w, dtype=float)).sum(-1)

    def subgrad(self, w):
        return self.weight * np.sign(w)

    @property
    def strong_convexity(self):
        return 0.0

    def to_dict(self):
        return {"kind": "scaled_l1", "weight": self.weight}


@dataclass(frozen=True, eq=False)
class PiecewiseLinearMax:
    """max_k (slopes[k] @ w + offsets[k])."""

    slopes: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        S = np.atleast_2d(np.asarray(self.slopes, dtype=float))
        o = _vec(self.offsets, S.shape[0], what="offsets")
        if S.shape[0] < 1:
            raise ValueError("PiecewiseLinearMax needs at least one piece")
        object.__setattr__(self, "slopes", S)
        object.__setattr__(self, "offsets", o)

    smooth = False

    def value(self, w):
        w = np.asarray(w, dtype=float)
        return (w @ self.slopes.T + self.offsets).max(-1)

    def subgrad(self, w):
        k = int(np.argmax(self.slopes @ w + self.offsets))
        return self.slopes[k].copy()

    @property
    def strong_convexity(self):
        return 0.0

    @property
    def subgrad_bound(self):
        return float(np.linalg.norm(self.slopes, axis=1).max())

    def to_dict(self):
        return {"kind": "pwl_max", "slopes": self.slopes.tolist(),
                "offsets": self.offsets.tolist()}


@dataclass(frozen=True, eq=False)
class Ridged:
    """base(w) + eps/2 * ||w - center||^2; produced by problem perturbation
    when the base term is not already quadratic."""

    base: "SeparableTerm"
    eps: float
    center: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center, what="center"))
        object.__setattr__(self, "eps", float(self.eps))

    @property
    def smooth(self):
        return self.base.smooth

    def value(self, w):
        w = np.asarray(w, dtype=float)
        return self.base.value(w) + 0.5 * self.eps * ((w - self.center) ** 2).sum(-1)

    def subgrad(self, w):
        return self.base.subgrad(w) + self.eps * (w - self.center)

    def grad(self, w):
        return self.base.grad(w) + self.eps * (w - self.center)

    @property
    def strong_convexity(self):
        return self.base.strong_convexity + self.eps

    @property
    def curvature(self):
        return self.base.curvature + self.eps

    def to_dict(self):
        return {"kind": "ridged", "base": self.base.to_dict(), "eps": self.eps,
                "center": self.center.tolist()}


SeparableTerm = Zero | Quadratic | ScaledL1 | PiecewiseLinearMax | Ridged


def term_from_dict(d):
    kind = d["kind"]
    if kind == "zero":
        return Zero()
    if kind == "quadratic":
        return Quadratic(np.array(d["diag"], dtype=float), np.array(d["linear"], dtype=float),
                         d.get("const", 0.0))
    if kind == "scaled_l1":
        return ScaledL1(d["weight"])
    if kind == "pwl_max":
        return PiecewiseLinearMax(np.array(d["slopes"], dtype=float),
                                  np.array(d["offsets"], dtype=float))
    if kind == "ridged":
        return Ridged(term_from_dict(d["base"]), d["eps"], np.array(d["center"], dtype=float))
    raise ValueError(f"unknown term kind {kind!r}")


# ---------------------------------------------------------------------------
# Proximal operators
# ---------------------------------------------------------------------------

def prox(term, cset, v, step, tol=1e-10):
    """argmin_{w in cset} step * term(w) + 0.5 * ||w - v||^2.

    Closed forms cover projection, quadratic terms on boxes/free space (and on
    any set when the diagonal is constant), and the l1 norm on boxes, free
    space, the simplex and the nonnegative ball. Everything else goes through
    an inner loop that runs until its stationarity residual is below `tol`.
    """
    if not step > 0:
        raise ValueError("prox step must be positive")
    v = _vec(v, cset.dim)
    step = float(step)

    if isinstance(term, Zero):
        return cset.project(v)

    if isinstance(term, Ridged):
        s = 1.0 + step * term.eps
        return prox(term.base, cset, (v + step * term.eps * term.center) / s, step / s, tol)

    if isinstance(term, Quadratic):
        scale = 1.0 + step * term.diag
        u = (v - step * term.linear) / scale
        if isinstance(cset, (Box, Free)):
            return cset.project(u)
        if np.ptp(term.diag) == 0.0:
            return cset.project(u)
        return _prox_smooth_loop(term, cset, v, step, tol)

    if isinstance(term, ScaledL1):
        t = step * term.weight
        if isinstance(cset, (Box, Free)):
            return cset.project(np.sign(v) * np.maximum(np.abs(v) - t, 0.0))
        if isinstance(cset, NonnegBall):
            return cset.project(v - t)
        if isinstance(cset, Simplex):
            return cset.project(v)
        return _prox_dykstra(lambda u: np.sign(u) * np.maximum(np.abs(u) - t, 0.0), cset, v, tol)

    if isinstance(term, PiecewiseLinearMax):
        return _prox_pwl(term, cset, v, step, tol)

    raise TypeError(f"unsupported term {type(term).__name__}")


def _prox_smooth_loop(term, cset, v, step, tol):
    # accelerated projected gradient on a strongly convex smooth objective
    L = 1.0 + step * term.curvature
    mu = 1.0 + step * term.strong_convexity
    beta = (np.sqrt(L) - np.sqrt(mu)) / (np.sqrt(L) + np.sqrt(mu))
    grad = lambda w: step * term.grad(w) + (w - v)
    w = cset.project(v)
    z = w.copy()
    for _ in range(PROX_MAX_ITER):
        w_new = cset.project(z - grad(z) / L)
        res = L * np.linalg.norm(w - cset.project(w - grad(w) / L))
        if res <= tol:
            return w
        z = w_new + beta * (w_new - w)
        w = w_new
    raise ProxError(f"smooth prox loop did not reach tol={tol:g}")


def _prox_dykstra(prox_f, cset, v, tol):
    # Dykstra-like splitting: converges to prox of (f + indicator of cset)
    x = v.copy()
    p = np.zeros_like(v)
    q = np.zeros_like(v)
    for _ in range(PROX_MAX_ITER):
        y = prox_f(x + p)
        p = x + p - y
        x_new = cset.project(y + q)
        q = y + q - x_new
        if np.linalg.norm(x_new - x) <= tol and np.linalg.norm(y - x_new) <= tol:
            return x_new
        x = x_new
    raise ProxError(f"Dykstra prox loop did not reach tol={tol:g}")


def _prox_pwl(term, cset, v, step, tol):
    # dual over the simplex: D(theta) = min_{w in C} 0.5||w - v||^2 + step theta'(S w + o),
    # attained at w(theta) = P_C(v - step S'theta); the primal is 1-strongly
    # convex, so ||w(theta) - w*|| <= sqrt(2 * duality gap)
    S, o = term.slopes, term.offsets
    K = S.shape[0]
    if K == 1:
        return cset.project(v - step * S[0])
    L = max(step * step * float(np.linalg.eigvalsh(S @ S.T).max()), 1e-300)
    simplex = Simplex(K)
    w_of = lambda th: cset.project(v - step * (S.T @ th))

    def dual(th):
        w = w_of(th)
        return w, 0.5 * float((w - v) @ (w - v)) + step * float(th @ (S @ w + o))

    box = cset.bounds() if isinstance(cset, (Box, Free)) else None
    theta = np.full(K, 1.0 / K)
    z = theta.copy()
    t = 1.0
    target = 0.5 * tol * tol
    for it in range(PROX_MAX_ITER):
        if box is not None and it % 10 == 0:
            wp = _pwl_box_polish(S, o, box[0], box[1], v, step, theta, w_of(theta), tol)
            if wp is not None:
                return wp
        wz = w_of(z)
        theta_new = simplex.project(z + step * (S @ wz + o) / L)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        w, dval = dual(theta_new)
        pval = step * float(np.max(S @ w + o)) + 0.5 * float((w - v) @ (w - v))
        gap = pval - dval
        if gap <= target or gap <= 1e-15 * max(1.0, abs(pval)):
            return w
        if (theta_new - z) @ (theta_new - theta) < 0:
            z, t_new = theta_new.copy(), 1.0  # adaptive restart
        else:
            z = theta_new + ((t - 1.0) / t_new) * (theta_new - theta)
        if np.array_equal(theta_new, theta):
            return w
        theta, t = theta_new, t_new
    return w_of(theta)


def _pwl_box_polish(S, o, lo, hi, v, step, theta, w, tol):
    # guess the active pieces and clamped coordinates, solve the KKT system
    # of min 0.5||w - v||^2 + step * t s.t. S w + o <= t, lo <= w <= hi
    # exactly and accept it only if every sign condition holds
    vals = S @ w + o
    K, d = S.shape
    act = (theta > 1e-9) | (vals >= vals.max() - 1e-9 * (1.0 + abs(vals.max())))
    J = np.flatnonzero(act)
    g = w - v + step * (S.T @ theta)
    scale = 1.0 + np.abs(w)
    at_lo = (w - lo <= 1e-9 * scale) & (g >= -1e-9)
    at_hi = (hi - w <= 1e-9 * scale) & (g <= 1e-9)
    fr = ~(at_lo | at_hi)
    wc = np.where(at_lo, lo, np.where(at_hi, hi, 0.0))
    SJ = S[J]
    SF = SJ[:, fr]
    # unknowns theta_J, t:  S_J w(theta) + o_J = t,  sum theta_J = 1
    # with w_free = v_free - step S_J,free' theta_J and clamped coords fixed
    n = len(J)
    M = np.zeros((n + 1, n + 1))
    rhs = np.zeros(n + 1)
    M[:n, :n] = -step * (SF @ SF.T)
    M[:n, n] = -1.0
    rhs[:n] = -(SF @ v[fr] + SJ[:, ~fr] @ wc[~fr] + o[J])
    M[n, :n] = 1.0
    rhs[n] = 1.0
    try:
        sol = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError:
        return None
    th = np.zeros(K)
    th[J] = sol[:n]
    if np.any(th < -1e-12):
        return None
    th = np.maximum(th, 0.0)
    wn = wc.copy()
    wn[fr] = v[fr] - step * (S[:, fr].T @ th)
    if np.any(wn < lo - 1e-12 * (1 + np.abs(lo))) or np.any(wn > hi + 1e-12 * (1 + np.abs(hi))):
        return None
    wn = np.clip(wn, lo, hi)
    vals = S @ wn + o
    if vals.max() > sol[n] + 1e-10 * (1.0 + abs(sol[n])):
        return None
    g = wn - v + step * (S.T @ th)
    gs = 1e-10 * (1.0 + np.abs(g).max())
    if np.any(g[at_lo] < -gs) or np.any(g[at_hi] > gs) or np.linalg.norm(g[fr]) > tol:
        return None
    return wn


# ---------------------------------------------------------------------------
# Block vectors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlockLayout:
    """Block dimensions of a stacked vector, with precomputed slices."""

    dims: tuple

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    @property
    def total(self):
        return sum(self.dims)

    @property
    def slices(self):
        offs = np.concatenate([[0], np.cumsum(self.dims)]).astype(int)
        return [slice(int(offs[i]), int(offs[i + 1])) for i in range(len(self.dims))]

    def split(self, v):
        v = _vec(v, self.total)
        return [v[s].copy() for s in self.slices]

    def concat(self, blocks):
        if len(blocks) != len(self.dims):
            raise ValueError("wrong number of blocks")
        for b, d in zip(blocks, self.dims):
            _vec(b, d, what="block")
        if not blocks:
            return np.zeros(0)
        return np.concatenate([np.asarray(b, dtype=float) for b in blocks])


@dataclass
class BlockVector:
    blocks: list = field(default_factory=list)

    @property
    def dims(self):
        return tuple(len(b) for b in self.blocks)

    def concat(self):
        return BlockLayout(self.dims).concat(self.blocks)

    @classmethod
    def split(cls, v, dims: Sequence[int]):
        return cls(BlockLayout(tuple(dims)).split(v))

    def __len__(self):
        return sum(self.dims)


# ---------------------------------------------------------------------------
# Spectral norm
# ---------------------------------------------------------------------------

def operator_norm(M, tol=1e-13):
    """Largest singular value of `M` by power iteration on M^T M.

    Starts from the normalized all-ones vector. A second pass from a fixed
    pseudo-random start guards against the all-ones start being orthogonal
    to the top singular vector; the larger of the two estimates is returned.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0 or not np.any(M):
        return 0.0
    n = M.shape[1]
    starts = [np.ones(n) / np.sqrt(n),
              np.random.default_rng(12345).standard_normal(n)]
    best = 0.0
    for v in starts:
        v = v / np.linalg.norm(v)
        r_old = 0.0
        for _ in range(POWER_MAX_ITER):
            w = M.T @ (M @ v)
            r = float(v @ w)
            nw = np.linalg.norm(w)
            if nw == 0.0:
                r = 0.0
                break
            v = w / nw
            if abs(r - r_old) < tol * r:
                break
            r_old = r
        # Rayleigh quotient of the final vector
        r = float(np.linalg.norm(M @ v) ** 2)
        best = max(best, r)
    return float(np.sqrt(best))
