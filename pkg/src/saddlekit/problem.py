"""Problem record for block-structured, affinely constrained saddle-point
problems

    min_{x in X} max_{y in Y}  h(x) + Psi(x, y) - g(y)   s.t.  A x = a,  B y = b,

with X = X_1 x ... x X_N and Y = Y_1 x ... x Y_M, plus the coupling oracles
and the perturbation / conic-slack transforms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .linalg import (
    BlockLayout, BlockVector, NonnegBall, Quadratic, Ridged, Zero, Simplex,
    operator_norm, set_from_dict, term_from_dict,
)

__all__ = [
    "CouplingOracle", "QuadraticCoupling", "CallableCoupling", "SaddleProblem",
    "phi_value", "supergrad_y", "perturb", "conic_to_equality", "conic_slack_radius",
    "as_flat", "check_gradient",
]


def as_flat(v, dim=None):
    """Accept a BlockVector, a list of blocks or a flat array; return a flat array."""
    if isinstance(v, BlockVector):
        v = v.concat()
    elif isinstance(v, (list, tuple)) and v and not np.isscalar(v[0]):
        v = np.concatenate([np.asarray(b, dtype=float) for b in v])
    v = np.asarray(v, dtype=float).reshape(-1)
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"dimension mismatch: got {v.shape[0]}, expected {dim}")
    return v


# ---------------------------------------------------------------------------
# Coupling oracles
# ---------------------------------------------------------------------------

class CouplingOracle:
    """Smooth convex-concave coupling Psi(x, y) on flat vectors.

    Subclasses provide `value`, `grad` and the Lipschitz constants. `L` bounds
    the full gradient, `L_x` the x-gradient in x, `L_xy` the cross term.
    """

    nx: int
    ny: int
    smooth_in_y = True

    def value(self, x, y):
        raise NotImplementedError

    def grad(self, x, y):
        raise NotImplementedError

    def grad_x(self, x, y):
        return self.grad(x, y)[0]

    def grad_y(self, x, y):
        return self.grad(x, y)[1]

    # explicit second-order structure, when known; enables exact QP solves
    hess_xx = None
    hess_yy = None
    cross = None

    def pad(self, nx_extra, ny_extra):
        return PaddedCoupling(self, nx_extra, ny_extra)


@dataclass(frozen=True, eq=False)
class QuadraticCoupling(CouplingOracle):
    """Psi = 0.5 x'Px + x'Ky - 0.5 y'Qy + p'x + q'y + c0."""

    P: np.ndarray
    K: np.ndarray
    Q: np.ndarray
    p: np.ndarray = None
    q: np.ndarray = None
    c0: float = 0.0

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float)
        if K.ndim != 2:
            raise ValueError("K must be a matrix")
        nx, ny = K.shape
        P = np.asarray(self.P, dtype=float).reshape(nx, nx)
        Q = np.asarray(self.Q, dtype=float).reshape(ny, ny)
        p = np.zeros(nx) if self.p is None else np.asarray(self.p, dtype=float).reshape(nx)
        q = np.zeros(ny) if self.q is None else np.asarray(self.q, dtype=float).reshape(ny)
        for name, val in (("K", K), ("P", P), ("Q", Q), ("p", p), ("q", q)):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "c0", float(self.c0))

    @property
    def nx(self):
        return self.K.shape[0]

    @property
    def ny(self):
        return self.K.shape[1]

    def value(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.ndim == 1 and y.ndim == 1:
            return float(0.5 * x @ self.P @ x + x @ self.K @ y - 0.5 * y @ self.Q @ y
                         + self.p @ x + self.q @ y + self.c0)
        # batched: rows of x and y
        x2 = np.atleast_2d(x)
        y2 = np.atleast_2d(y)
        return (0.5 * np.einsum("bi,ij,bj->b", x2, self.P, x2)
                + np.einsum("bi,ij,bj->b", x2, self.K, y2)
                - 0.5 * np.einsum("bi,ij,bj->b", y2, self.Q, y2)
                + x2 @ self.p + y2 @ self.q + self.c0)

    def grad(self, x, y):
        return (self.P @ x + self.K @ y + self.p, self.K.T @ x - self.Q @ y + self.q)

    def grad_x(self, x, y):
        return self.P @ x + self.K @ y + self.p

    def grad_y(self, x, y):
        return self.K.T @ x - self.Q @ y + self.q

    @property
    def hess_xx(self):
        return self.P

    @property
    def hess_yy(self):
        return -self.Q

    @property
    def cross(self):
        return self.K

    @cached_property
    def jacobian(self):
        return np.block([[self.P, self.K], [self.K.T, -self.Q]])

    @cached_property
    def L(self):
        J = self.jacobian
        return float(np.linalg.norm(J, 2)) if J.size else 0.0

    @cached_property
    def L_x(self):
        return float(np.linalg.norm(self.P, 2)) if self.P.size else 0.0

    def pad(self, nx_extra, ny_extra):
        nx, ny = self.nx + nx_extra, self.ny + ny_extra
        P = np.zeros((nx, nx)); P[:self.nx, :self.nx] = self.P
        K = np.zeros((nx, ny)); K[:self.nx, :self.ny] = self.K
        Q = np.zeros((ny, ny)); Q[:self.ny, :self.ny] = self.Q
        p = np.concatenate([self.p, np.zeros(nx_extra)])
        q = np.concatenate([self.q, np.zeros(ny_extra)])
        return QuadraticCoupling(P, K, Q, p, q, self.c0)

    def to_dict(self):
        return {"kind": "quadratic", "P": self.P.tolist(), "K": self.K.tolist(),
                "Q": self.Q.tolist(), "p": self.p.tolist(), "q": self.q.tolist(),
                "c0": self.c0, "nx": self.nx, "ny": self.ny}

    @classmethod
    def from_dict(cls, d):
        nx, ny = int(d["nx"]), int(d["ny"])
        arr = lambda v, shape: np.array(v, dtype=float).reshape(shape)
        return cls(arr(d["P"], (nx, nx)), arr(d["K"], (nx, ny)), arr(d["Q"], (ny, ny)),
                   arr(d["p"], (nx,)), arr(d["q"], (ny,)), d["c0"])


class CallableCoupling(CouplingOracle):
    """Wrap user callables. Lipschitz constants must be supplied."""

    def __init__(self, nx, ny, value, grad, L, L_x, L_xy=None):
        self.nx, self.ny = int(nx), int(ny)
        self._value, self._grad = value, grad
        self.L, self.L_x = float(L), float(L_x)
        self.L_xy = L_xy

    def value(self, x, y):
        return float(self._value(x, y))

    def grad(self, x, y):
        gx, gy = self._grad(x, y)
        return np.asarray(gx, dtype=float), np.asarray(gy, dtype=float)

    def to_dict(self):
        raise TypeError("callable couplings cannot be serialized")


class PaddedCoupling(CouplingOracle):
    """Base coupling extended by trailing coordinates it does not depend on."""

    def __init__(self, base, nx_extra, ny_extra):
        self.base = base
        self.nx, self.ny = base.nx + nx_extra, base.ny + ny_extra
        self.L, self.L_x = base.L, base.L_x

    def value(self, x, y):
        return self.base.value(x[..., :self.base.nx], y[..., :self.base.ny])

    def grad(self, x, y):
        gx, gy = self.base.grad(x[:self.base.nx], y[:self.base.ny])
        return (np.concatenate([gx, np.zeros(self.nx - self.base.nx)]),
                np.concatenate([gy, np.zeros(self.ny - self.base.ny)]))

    def to_dict(self):
        raise TypeError("padded generic couplings cannot be serialized")


def coupling_from_dict(d):
    if d["kind"] == "quadratic":
        return QuadraticCoupling.from_dict(d)
    raise ValueError(f"unknown coupling kind {d['kind']!r}")


def check_gradient(coupling, x, y, h=1e-5):
    """Max relative error between `coupling.grad` and central differences."""
    gx, gy = coupling.grad(x, y)
    g = np.concatenate([gx, gy])
    z = np.concatenate([x, y])
    nx = len(x)
    fd = np.empty_like(z)
    for i in range(len(z)):
        e = np.zeros_like(z)
        e[i] = h
        zp, zm = z + e, z - e
        fd[i] = (coupling.value(zp[:nx], zp[nx:]) - coupling.value(zm[:nx], zm[nx:])) / (2 * h)
    scale = max(1.0, float(np.linalg.norm(g)))
    return float(np.linalg.norm(fd - g) / scale)


# ---------------------------------------------------------------------------
# Problem record
# ---------------------------------------------------------------------------

def _stack(blocks, rows, dims):
    if not dims:
        return np.zeros((rows, 0))
    if not blocks:
        return np.zeros((rows, sum(dims)))
    return np.hstack([np.asarray(M, dtype=float).reshape(rows, d) for M, d in zip(blocks, dims)])


def _as_block(M, rows, cols):
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return np.zeros((rows, cols))
    return M.reshape(rows, -1)


@dataclass(frozen=True, eq=False)
class SaddleProblem:
    """Block-structured saddle-point instance.

    Parameters
    ----------
    x_blocks, y_blocks : list of (ConvexSet, SeparableTerm)
    coupling : CouplingOracle
    A_blocks, B_blocks : list of ndarray
        Constraint matrices; an empty list or zero-row matrices mean the
        corresponding constraint is absent.
    a, b : ndarray
    x_feas, y_feas : ndarray, optional
        A point with A x = a, B y = b inside the sets. This is what the
        feasibility sampler returns.
    ell : float, optional
        Bound on the y-supergradient of Phi; needed for nonsmooth-in-y runs.
    meta : dict
        Generator id, seed, parameters, cone flags.
    """

    x_blocks: list
    y_blocks: list
    coupling: CouplingOracle
    A_blocks: list
    a: np.ndarray
    B_blocks: list = field(default_factory=list)
    b: np.ndarray = None
    x_feas: np.ndarray = None
    y_feas: np.ndarray = None
    ell: float = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.zeros(0) if self.a is None else np.asarray(self.a, dtype=float).reshape(-1)
        b = np.zeros(0) if self.b is None else np.asarray(self.b, dtype=float).reshape(-1)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        xd, yd = self.x_layout.dims, self.y_layout.dims
        A_blocks = [_as_block(M, len(a), d) for M, d in zip(self.A_blocks, xd)] \
            if self.A_blocks else [np.zeros((len(a), d)) for d in xd]
        B_blocks = [_as_block(M, len(b), d) for M, d in zip(self.B_blocks, yd)] \
            if self.B_blocks else [np.zeros((len(b), d)) for d in yd]
        if (self.A_blocks and len(self.A_blocks) != len(xd)) or (self.B_blocks and len(self.B_blocks) != len(yd)):
            raise ValueError("one constraint matrix per block is required")
        if len(A_blocks) != len(xd) or len(B_blocks) != len(yd):
            raise ValueError("one constraint matrix per block is required")
        for M, d in zip(A_blocks, xd):
            if M.shape != (len(a), d):
                raise ValueError(f"A block has shape {M.shape}, expected {(len(a), d)}")
        for M, d in zip(B_blocks, yd):
            if M.shape != (len(b), d):
                raise ValueError(f"B block has shape {M.shape}, expected {(len(b), d)}")
        object.__setattr__(self, "A_blocks", A_blocks)
        object.__setattr__(self, "B_blocks", B_blocks)
        if self.coupling.nx != sum(xd) or self.coupling.ny != sum(yd):
            raise ValueError("coupling dimensions do not match the blocks")
        for name in ("x_feas", "y_feas"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, np.asarray(v, dtype=float).reshape(-1))

    # --- structure --------------------------------------------------------
    @cached_property
    def x_layout(self):
        return BlockLayout(tuple(s.dim for s, _ in self.x_blocks))

    @cached_property
    def y_layout(self):
        return BlockLayout(tuple(s.dim for s, _ in self.y_blocks))

    @property
    def N(self):
        return len(self.x_blocks)

    @property
    def M(self):
        return len(self.y_blocks)

    @property
    def n(self):
        return len(self.a)

    @property
    def m(self):
        return len(self.b)

    @property
    def dx(self):
        return self.x_layout.total

    @property
    def dy(self):
        return self.y_layout.total

    @cached_property
    def A(self):
        return _stack(self.A_blocks, self.n, self.x_layout.dims)

    @cached_property
    def B(self):
        return _stack(self.B_blocks, self.m, self.y_layout.dims)

    @property
    def one_sided(self):
        return self.m == 0

    # --- constants --------------------------------------------------------
    @cached_property
    def norm_A(self):
        return operator_norm(self.A) if self.A.size else 0.0

    @cached_property
    def norm_B(self):
        return operator_norm(self.B) if self.B.size else 0.0

    @cached_property
    def block_norms_A(self):
        return [operator_norm(M) if M.size else 0.0 for M in self.A_blocks]

    @cached_property
    def block_norms_B(self):
        return [operator_norm(M) if M.size else 0.0 for M in self.B_blocks]

    @property
    def L(self):
        return self.coupling.L

    @property
    def L_x(self):
        return self.coupling.L_x

    @cached_property
    def smooth_in_y(self):
        return all(t.smooth for _, t in self.y_blocks) and self.coupling.smooth_in_y

    @cached_property
    def L_y(self):
        """Lipschitz constant of grad_y Phi in (x, y), or None if not smooth."""
        if not self.smooth_in_y:
            return None
        c = self.coupling
        if c.cross is not None and c.hess_yy is not None:
            curv = np.concatenate([_curv_diag(t, s.dim) for s, t in self.y_blocks]) \
                if self.y_blocks else np.zeros(0)
            J = np.hstack([c.cross.T, c.hess_yy - np.diag(curv)])
            return float(np.linalg.norm(J, 2)) if J.size else 0.0
        L_y = getattr(c, "L_y", None)
        if L_y is None:
            return None
        return float(L_y) + max((t.curvature for _, t in self.y_blocks), default=0.0)

    @cached_property
    def x_diameters(self):
        return [s.diameter() for s, _ in self.x_blocks]

    @cached_property
    def y_diameters(self):
        return [s.diameter() for s, _ in self.y_blocks]

    @property
    def D_X(self):
        return float(np.sqrt(sum(d * d for d in self.x_diameters)))

    @property
    def D_Y(self):
        return float(np.sqrt(sum(d * d for d in self.y_diameters)))

    @cached_property
    def mu(self):
        """Strong-convexity moduli of the x-side terms."""
        return [float(t.strong_convexity) for _, t in self.x_blocks]

    # --- evaluation -------------------------------------------------------
    def residual_x(self, x):
        return self.A @ x - self.a

    def residual_y(self, y):
        return self.B @ y - self.b

    def h(self, x):
        return sum(float(t.value(xi)) for (_, t), xi in zip(self.x_blocks, self.x_layout.split(x)))

    def g(self, y):
        return sum(float(t.value(yj)) for (_, t), yj in zip(self.y_blocks, self.y_layout.split(y)))

    def project_x(self, x):
        return np.concatenate([s.project(xi) for (s, _), xi in zip(self.x_blocks, self.x_layout.split(x))]) \
            if self.N else np.zeros(0)

    def project_y(self, y):
        return np.concatenate([s.project(yj) for (s, _), yj in zip(self.y_blocks, self.y_layout.split(y))]) \
            if self.M else np.zeros(0)

    def in_x(self, x, tol=1e-9):
        return all(s.contains(xi, tol) for (s, _), xi in zip(self.x_blocks, self.x_layout.split(x)))

    def in_y(self, y, tol=1e-9):
        return all(s.contains(yj, tol) for (s, _), yj in zip(self.y_blocks, self.y_layout.split(y)))

    def center_x(self):
        return np.concatenate([s.center() for s, _ in self.x_blocks]) if self.N else np.zeros(0)

    def center_y(self):
        return np.concatenate([s.center() for s, _ in self.y_blocks]) if self.M else np.zeros(0)

    def feasible_point(self):
        """The stored deterministic feasible point (x, y)."""
        if self.x_feas is None or self.y_feas is None:
            raise ValueError("problem carries no feasible point")
        return self.x_feas.copy(), self.y_feas.copy()

    def sample_feasible(self, rng, side="x", spread=1.0):
        """Random point of {x in X : Ax = a} (or the y analogue).

        Moves from the stored feasible point along a random direction in the
        null space of the equality rows (including the sum rows of simplex
        blocks), by a random fraction of the largest step that stays in the
        sets.
        """
        base = (self.x_feas if side == "x" else self.y_feas).copy()
        blocks = self.x_blocks if side == "x" else self.y_blocks
        layout = self.x_layout if side == "x" else self.y_layout
        M = self.A if side == "x" else self.B
        rows = [M] if M.size else []
        for (s, _), sl in zip(blocks, layout.slices):
            if isinstance(s, Simplex):
                r = np.zeros((1, layout.total))
                r[0, sl] = 1.0
                rows.append(r)
        C = np.vstack(rows) if rows else np.zeros((0, layout.total))
        if C.shape[0]:
            _, sv, Vt = np.linalg.svd(C)
            rank = int(np.sum(sv > 1e-10 * max(1.0, sv.max(initial=0.0))))
            Z = Vt[rank:].T
        else:
            Z = np.eye(layout.total)
        if Z.shape[1] == 0:
            return base
        d = Z @ rng.standard_normal(Z.shape[1])
        nd = np.linalg.norm(d)
        if nd == 0:
            return base
        d /= nd
        inside = (lambda v: self.in_x(v, 1e-12)) if side == "x" else (lambda v: self.in_y(v, 1e-12))
        lo, hi = 0.0, 1.0
        while inside(base + hi * d) and hi < 1e6:
            lo, hi = hi, 2 * hi
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if inside(base + mid * d):
                lo = mid
            else:
                hi = mid
        return base + spread * rng.uniform() * lo * d

    # --- serialization ----------------------------------------------------
    def to_dict(self):
        return {
            "x_blocks": [{"set": s.to_dict(), "term": t.to_dict()} for s, t in self.x_blocks],
            "y_blocks": [{"set": s.to_dict(), "term": t.to_dict()} for s, t in self.y_blocks],
            "coupling": self.coupling.to_dict(),
            "A_blocks": [M.tolist() for M in self.A_blocks],
            "a": self.a.tolist(),
            "B_blocks": [M.tolist() for M in self.B_blocks],
            "b": self.b.tolist(),
            "x_feas": None if self.x_feas is None else self.x_feas.tolist(),
            "y_feas": None if self.y_feas is None else self.y_feas.tolist(),
            "ell": self.ell,
            "constants": {"L": self.L, "L_x": self.L_x, "L_y": self.L_y,
                          "norm_A": self.norm_A, "norm_B": self.norm_B},
            "meta": self.meta,
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        xb = [(set_from_dict(e["set"]), term_from_dict(e["term"])) for e in d["x_blocks"]]
        yb = [(set_from_dict(e["set"]), term_from_dict(e["term"])) for e in d["y_blocks"]]
        a = np.array(d["a"], dtype=float)
        b = np.array(d["b"], dtype=float)
        A = [np.array(M, dtype=float).reshape(len(a), s.dim) for M, (s, _) in zip(d["A_blocks"], xb)]
        B = [np.array(M, dtype=float).reshape(len(b), s.dim) for M, (s, _) in zip(d["B_blocks"], yb)]
        opt = lambda v: None if v is None else np.array(v, dtype=float)
        return cls(xb, yb, coupling_from_dict(d["coupling"]), A, a, B, b,
                   opt(d.get("x_feas")), opt(d.get("y_feas")), d.get("ell"), d.get("meta", {}))

    @classmethod
    def from_json(cls, s):
        return cls.from_dict(json.loads(s))


def _curv_diag(term, dim):
    if isinstance(term, Quadratic):
        return term.diag
    if isinstance(term, Ridged):
        return _curv_diag(term.base, dim) + term.eps
    return np.zeros(dim)


# ---------------------------------------------------------------------------
# Evaluation helpers
# ---------------------------------------------------------------------------

def phi_value(problem, x, y):
    """Phi(x, y) = h(x) + Psi(x, y) - g(y)."""
    x = as_flat(x, problem.dx)
    y = as_flat(y, problem.dy)
    return problem.h(x) + problem.coupling.value(x, y) - problem.g(y)


def supergrad_y(problem, x, y):
    """An element of the superdifferential of Phi(x, .) at y."""
    gy = problem.coupling.grad_y(x, y)
    if not problem.M:
        return gy
    sub = np.concatenate([t.subgrad(yj) for (_, t), yj in zip(problem.y_blocks, problem.y_layout.split(y))])
    return gy - sub


def grad_x_phi_smooth(problem, x, y):
    return problem.coupling.grad_x(x, y)


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------

def perturb(problem, eps, x0):
    """Add (eps/2) * ||x_i - x0_i||^2 to h_i for every block i >= 2."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    x0 = as_flat(x0, problem.dx)
    if eps == 0:
        return problem
    blocks = list(problem.x_blocks)
    for i, ((s, t), xi0) in enumerate(zip(problem.x_blocks, problem.x_layout.split(x0))):
        if i == 0:
            continue
        if isinstance(t, (Zero, Quadratic)):
            # stays in closed form: expand the square
            diag = (t.diag if isinstance(t, Quadratic) else np.zeros(s.dim)) + eps
            lin = (t.linear if isinstance(t, Quadratic) else np.zeros(s.dim)) - eps * xi0
            const = (t.const if isinstance(t, Quadratic) else 0.0) + 0.5 * eps * float(xi0 @ xi0)
            blocks[i] = (s, Quadratic(diag, lin, const))
        else:
            blocks[i] = (s, Ridged(t, eps, xi0))
    meta = dict(problem.meta)
    meta["perturbation"] = {"eps": float(eps), "x0": x0.tolist()}
    return replace(problem, x_blocks=blocks, meta=meta)


def conic_slack_radius(a_norm, A_norm, D):
    """Radius bounding every feasible slack: ||a|| + ||A|| * D."""
    return float(a_norm) + float(A_norm) * float(D)


def conic_to_equality(problem):
    """Turn A x <= a (nonnegative orthant) constraints into equalities with a
    slack block, and likewise on the y side.

    The problem's ``meta["cones"]`` maps ``"x"`` / ``"y"`` to ``"nonneg"``
    for each side carrying an inequality. The slack block has identity
    constraint columns, a Zero term and a NonnegBall set of radius
    ||a|| + ||A|| D_X.
    """
    cones = problem.meta.get("cones")
    if not cones:
        raise ValueError("problem carries no cone metadata")
    for side, kind in cones.items():
        if side not in ("x", "y"):
            raise ValueError(f"unknown cone side {side!r}")
        if kind != "nonneg":
            raise ValueError(f"unsupported cone variant {kind!r}")
    xb, yb = list(problem.x_blocks), list(problem.y_blocks)
    Ab, Bb = list(problem.A_blocks), list(problem.B_blocks)
    x_feas, y_feas = problem.x_feas, problem.y_feas
    nx_extra = ny_extra = 0
    info = {}
    if "x" in cones and problem.n:
        r = conic_slack_radius(np.linalg.norm(problem.a), problem.norm_A, problem.D_X)
        xb.append((NonnegBall(problem.n, r), Zero()))
        Ab.append(np.eye(problem.n))
        nx_extra = problem.n
        info["x_radius"] = r
        if x_feas is not None:
            s = problem.a - problem.A @ x_feas
            if not xb[-1][0].contains(s, 1e-9):
                raise ValueError("stored feasible point violates the x-side cone constraint")
            x_feas = np.concatenate([x_feas, np.maximum(s, 0.0)])
    if "y" in cones and problem.m:
        r = conic_slack_radius(np.linalg.norm(problem.b), problem.norm_B, problem.D_Y)
        yb.append((NonnegBall(problem.m, r), Zero()))
        Bb.append(np.eye(problem.m))
        ny_extra = problem.m
        info["y_radius"] = r
        if y_feas is not None:
            s = problem.b - problem.B @ y_feas
            if not yb[-1][0].contains(s, 1e-9):
                raise ValueError("stored feasible point violates the y-side cone constraint")
            y_feas = np.concatenate([y_feas, np.maximum(s, 0.0)])
    meta = {k: v for k, v in problem.meta.items() if k != "cones"}
    meta["conic_slack"] = info
    return SaddleProblem(xb, yb, problem.coupling.pad(nx_extra, ny_extra), Ab, problem.a,
                         Bb, problem.b, x_feas, y_feas, problem.ell, meta)
