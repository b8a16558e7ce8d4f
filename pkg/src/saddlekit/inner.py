"""Inner solvers shared by the ADMM block updates and the certifier:
accelerated proximal gradient with adaptive restart, and an exact
active-set polish for box-constrained quadratics.
"""

import numpy as np

from .linalg import PROX_MAX_ITER, ProxError


def grad_map_residual(grad, prox, x, lip):
    """L * ||x - prox(x - grad(x)/L)||: zero exactly at stationary points."""
    return lip * float(np.linalg.norm(x - prox(x - grad(x) / lip, 1.0 / lip)))


def minimize_composite(grad, lip, prox, x0, tol, max_iter=PROX_MAX_ITER, polish=None,
                       polish_every=50):
    """Minimize f + r where f has an L-Lipschitz gradient and r has a prox.

    Parameters
    ----------
    grad : callable
        Gradient of the smooth part.
    lip : float
        Lipschitz constant of `grad`.
    prox : callable
        ``prox(v, step)`` for r (including the set indicator).
    polish : callable, optional
        Maps an approximate solution to an exact one (or None); tried
        periodically once the iterates settle.

    Returns
    -------
    x : ndarray
    residual : float
        Gradient-mapping stationarity residual at `x`.
    """
    lip = max(float(lip), 1e-12)
    x = prox(np.asarray(x0, dtype=float), 1.0 / lip)
    if polish is not None:
        xp = polish(x)
        if xp is not None:
            r = grad_map_residual(grad, prox, xp, lip)
            if r <= tol:
                return xp, r
    z = x.copy()
    t = 1.0
    for it in range(1, max_iter + 1):
        gz = grad(z)
        x_new = prox(z - gz / lip, 1.0 / lip)
        cheap = lip * float(np.linalg.norm(z - x_new))
        if cheap <= tol:
            r = grad_map_residual(grad, prox, x_new, lip)
            if r <= tol:
                return x_new, r
        if polish is not None and it % polish_every == 0:
            xp = polish(x_new)
            if xp is not None:
                r = grad_map_residual(grad, prox, xp, lip)
                if r <= tol:
                    return xp, r
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        if (z - x_new) @ (x_new - x) > 0:
            # gradient-based adaptive restart
            t_new = 1.0
            z = x_new.copy()
        else:
            z = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, t = x_new, t_new
    r = grad_map_residual(grad, prox, x, lip)
    raise ProxError(f"inner solver hit {max_iter} iterations (residual {r:.3e}, tol {tol:.1e})")


def box_qp_polish(H, c, lo, hi, x, rel=1e-7, tol=1e-12):
    """Exact minimizer of 0.5 x'Hx + c'x on [lo, hi] given an approximate one.

    Guesses the active set from `x`, solves the reduced linear system and
    accepts the result only if it is feasible and its multipliers have the
    right signs. Returns None otherwise.
    """
    g = H @ x + c
    scale = 1.0 + np.abs(x)
    at_lo = (x - lo <= rel * scale) & (g >= 0)
    at_hi = (hi - x <= rel * scale) & (g <= 0)
    act = at_lo | at_hi
    free = ~act
    w = x.copy()
    w[at_lo] = lo[at_lo]
    w[at_hi] = hi[at_hi]
    if free.any():
        Hff = H[np.ix_(free, free)]
        rhs = -(c[free] + H[np.ix_(free, act)] @ w[act])
        try:
            sol = np.linalg.solve(Hff, rhs)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(Hff, rhs, rcond=None)[0]
        if not np.allclose(Hff @ sol, rhs, rtol=1e-10, atol=1e-10 * (1 + np.abs(rhs).max())):
            return None
        w[free] = sol
    if np.any(w < lo - tol * (1 + np.abs(lo))) or np.any(w > hi + tol * (1 + np.abs(hi))):
        return None
    w = np.clip(w, lo, hi)
    g = H @ w + c
    gscale = 1e-10 * (1.0 + np.abs(g).max())
    if np.any(g[at_lo] < -gscale) or np.any(g[at_hi] > gscale):
        return None
    return w
