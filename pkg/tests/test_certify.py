import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from saddlekit.certify import (
    CertificationError, GapReport, best_response, brute_force_gap, check_step_inequality,
    egmm_G, lemma3_slack, penalty_gap, residuals, sample_probes,
)
from saddlekit.generators import gen_bilinear_qp, gen_pwl_saddle, gen_resource_game, gen_tiny
from saddlekit.linalg import Ball, Box, Quadratic, Zero
from saddlekit.problem import QuadraticCoupling, SaddleProblem, phi_value
from saddlekit.solvers import RunConfig, run


def xy_problem(x_rows=False):
    # Phi = x y on [-1, 1]^2, optionally with the constraint x = 0
    A = [np.array([[1.0]])] if x_rows else []
    a = np.zeros(1) if x_rows else np.zeros(0)
    return SaddleProblem([(Box.uniform(1), Zero())], [(Box.uniform(1), Zero())],
                         QuadraticCoupling(np.zeros((1, 1)), np.array([[1.0]]), np.zeros((1, 1))),
                         A, a, x_feas=np.zeros(1), y_feas=np.zeros(1))


def known_saddle(seed):
    """Box-constrained quadratic saddle with an interior KKT point (x*, y*)
    for A x = a and B y = b, built from chosen multipliers."""
    rng = np.random.default_rng(seed)
    dx, dy, n, m = 4, 3, 2, 1
    K = rng.normal(size=(dx, dy))
    hd, gd = rng.uniform(0.5, 2.0, dx), rng.uniform(0.5, 2.0, dy)
    A, B = rng.normal(size=(n, dx)), rng.normal(size=(m, dy))
    xs, ys = rng.uniform(-0.5, 0.5, dx), rng.uniform(-0.5, 0.5, dy)
    lam, mu = rng.normal(size=n), rng.normal(size=m)
    # grad_x: hd*x + c + K y - A'lam = 0 ; grad_y of (x'Ky - g): K'x - gd*y - d + B'mu = 0
    c = -(hd * xs + K @ ys) + A.T @ lam
    d = K.T @ xs - gd * ys + B.T @ mu
    p = SaddleProblem([(Box.uniform(dx), Quadratic(hd, c))], [(Box.uniform(dy), Quadratic(gd, d))],
                      QuadraticCoupling(np.zeros((dx, dx)), K, np.zeros((dy, dy))),
                      [A], A @ xs, [B], B @ ys, x_feas=xs, y_feas=ys)
    return p, xs, ys


# --- residuals and best responses --------------------------------------------

def test_residual_examples():
    p = SaddleProblem([(Box.uniform(2, -5, 5), Zero())], [],
                      QuadraticCoupling(np.zeros((2, 2)), np.zeros((2, 0)), np.zeros((0, 0))),
                      [np.array([[1.0, 1.0]])], np.array([2.0]))
    assert residuals(p, [0.0, 0.0], []) == (2.0, 0.0)
    q = gen_resource_game(0)
    x, y = q.feasible_point()
    rx, ry = residuals(q, x, y)
    assert rx <= 1e-9 and ry <= 1e-9


def test_best_response_examples():
    p = SaddleProblem([(Box.uniform(2), Quadratic([1.0, 1.0], [0.0, 0.0]))], [],
                      QuadraticCoupling(np.zeros((2, 2)), np.zeros((2, 0)), np.zeros((0, 0))),
                      [np.array([[1.0, 1.0]])], np.array([1.0]), x_feas=np.array([0.5, 0.5]))
    v, w, r = best_response(p, "min_x", np.zeros(0))
    assert v == pytest.approx(0.25, abs=1e-8)
    np.testing.assert_allclose(w, [0.5, 0.5], atol=1e-7)
    assert r <= 1e-8
    v, w, _ = best_response(xy_problem(), "max_y", [1.0])
    assert v == pytest.approx(1.0, abs=1e-10) and w[0] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        best_response(p, "sideways", np.zeros(0))


@pytest.mark.parametrize("seed", range(5))
def test_best_responses_meet_at_known_saddle(seed):
    p, xs, ys = known_saddle(seed)
    tol = 1e-8
    rep = penalty_gap(p, xs, ys, 10.0, tol=tol)
    assert abs(rep.br_max - rep.br_min) <= 2 * tol * 10
    assert rep.br_max == pytest.approx(phi_value(p, xs, ys), abs=1e-7)
    assert rep.penalty_gap <= 1e-6


def test_certification_error_carries_best_iterate(monkeypatch):
    import saddlekit.certify as C
    monkeypatch.setattr(C, "ALM_MAX_OUTER", 1)
    p, xs, ys = known_saddle(0)
    with pytest.raises(CertificationError) as ei:
        best_response(p, "min_x", ys + 0.3, tol=1e-14)
    assert ei.value.point.shape == (p.dx,) and ei.value.residual > 0
    rep = penalty_gap(p, xs, ys + 0.3, 1.0, tol=1e-14, strict=False)
    assert not rep.converged


# --- penalty gap -------------------------------------------------------------

def test_penalty_gap_example():
    rep = penalty_gap(xy_problem(x_rows=True), [0.5], [0.0], 1.0)
    assert rep.br_max == pytest.approx(0.5, abs=1e-9)
    assert rep.br_min == pytest.approx(0.0, abs=1e-9)
    assert rep.penalty_gap == pytest.approx(1.0, abs=1e-8)


def test_penalty_gap_rho_linear_and_monotone():
    p = gen_bilinear_qp(1)
    x = p.center_x()
    y = p.center_y()
    r1 = penalty_gap(p, x, y, 1.0)
    r2 = penalty_gap(p, x, y, 2.0)
    assert r2.penalty_gap - r1.penalty_gap == pytest.approx(r1.res_x + r1.res_y, rel=1e-9)
    assert r1.at_rho(2.0) == pytest.approx(r2.penalty_gap, rel=1e-9)
    with pytest.raises(ValueError):
        penalty_gap(p, x, y, 0.0)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 100.0))
def test_gap_report_recomputes(seed, rho):
    p = gen_tiny(seed % 50, rows_m=1)
    rng = np.random.default_rng(seed)
    rep = penalty_gap(p, p.project_x(rng.normal(size=p.dx)), p.project_y(rng.normal(size=p.dy)), rho)
    assert rep.recompute() == pytest.approx(rep.penalty_gap, abs=1e-12)
    assert rep.at_rho(1.0) == pytest.approx(rep.gap_rho1, abs=1e-12)
    assert rep.at_rho(2 * rho) >= rep.penalty_gap


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_weak_duality_on_feasible_pairs(seed):
    p = gen_bilinear_qp(seed % 20)
    rng = np.random.default_rng(seed)
    tol = 1e-8
    x, y = p.sample_feasible(rng, "x"), p.sample_feasible(rng, "y")
    rep = penalty_gap(p, x, y, 10.0, tol=tol)
    f = phi_value(p, x, y)
    assert rep.br_max >= f - 2 * tol
    assert f >= rep.br_min - 2 * tol
    assert rep.br_max - rep.br_min >= -2 * tol


def test_gap_report_json():
    rep = penalty_gap(xy_problem(x_rows=True), [0.5], [0.0], 1.0)
    d = json.loads(rep.to_json())
    assert set(d) >= {"br_max", "br_min", "res_x", "res_y", "rho", "penalty_gap", "kkt_max", "kkt_min"}
    assert GapReport(**d).recompute() == pytest.approx(rep.penalty_gap)


# --- grid oracle -------------------------------------------------------------

def test_brute_force_one_dim_quadratic():
    # min (x - 0.33)^2 / 2 over [-1, 1]: grid pitch 0.05
    p = SaddleProblem([(Box.uniform(1), Quadratic([1.0], [-0.33]))], [],
                      QuadraticCoupling(np.zeros((1, 1)), np.zeros((1, 0)), np.zeros((0, 0))),
                      [], np.zeros(0))
    rep = brute_force_gap(p, [0.0], [], 1.0, grid_points_per_dim=41)
    exact = -0.5 * 0.33 ** 2
    assert abs(rep.br_min - exact) <= 2.0 * 0.05
    assert rep.br_min >= exact - 1e-15


@pytest.mark.parametrize("seed", range(20))
def test_brute_force_agrees_with_best_response(seed):
    p = gen_tiny(seed, rows_m=seed % 2)
    rng = np.random.default_rng(seed)
    x, y = p.project_x(rng.normal(size=p.dx)), p.project_y(rng.normal(size=p.dy))
    exact = penalty_gap(p, x, y, 10.0, tol=1e-9)
    grid = brute_force_gap(p, x, y, 10.0)
    # the grid can only under-estimate the max and over-estimate the min
    assert grid.br_max <= exact.br_max + 1e-9
    assert grid.br_min >= exact.br_min - 1e-9
    assert abs(grid.penalty_gap - exact.penalty_gap) <= grid.error_bound + 2e-9


def test_brute_force_ball_set():
    p = SaddleProblem([(Ball(np.zeros(2), 1.0), Quadratic([1.0, 1.0], [-1.0, -1.0]))], [],
                      QuadraticCoupling(np.zeros((2, 2)), np.zeros((2, 0)), np.zeros((0, 0))),
                      [], np.zeros(0))
    exact = penalty_gap(p, [0.0, 0.0], [], 1.0)
    grid = brute_force_gap(p, [0.0, 0.0], [], 1.0)
    assert abs(grid.br_min - exact.br_min) <= grid.error_bound


def test_brute_force_limits():
    with pytest.raises(ValueError):
        brute_force_gap(gen_bilinear_qp(0), np.zeros(8), np.zeros(8), 1.0)
    # rank-deficient rows force the residual filter, which keeps no point here
    p = SaddleProblem([(Box.uniform(2), Zero())], [],
                      QuadraticCoupling(np.zeros((2, 2)), np.zeros((2, 0)), np.zeros((0, 0))),
                      [np.array([[1.0, 1.0], [2.0, 2.0]])], np.array([5.0, 10.0]))
    with pytest.raises(ValueError):
        brute_force_gap(p, [0.0, 0.0], [], 1.0, grid_points_per_dim=5)


# --- one-step inequalities ---------------------------------------------------

def test_lemma3_stationary_supergradient():
    p = gen_pwl_saddle(0)
    snaps = []
    run(p, RunConfig(algorithm="ssg_admm", T=3), on_step=snaps.append)
    s = dict(snaps[-1])
    s["u_k"] = np.zeros_like(s["u_k"])
    s["y_k1"] = s["y_k"]
    # y_k becomes the maximizer of Phi(x^{k+1}, .) when u = 0 is a supergradient there
    v, yopt, _ = best_response(p, "max_y", s["state_k1"].x)
    s["y_k"] = s["y_k1"] = yopt
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert lemma3_slack(p, s, p.project_y(rng.normal(size=p.dy) * 2)) >= -1e-8


@pytest.mark.parametrize("kind,alg,make", [
    ("lemma2", "seg_admm", lambda s: gen_bilinear_qp(s, rows_m=0)),
    ("lemma3", "ssg_admm", gen_pwl_saddle),
    ("lemma4", "seg_admm", lambda s: gen_bilinear_qp(s, rows_m=0)),
    ("lemma7", "seg_admm", lambda s: gen_bilinear_qp(s, n_blocks_x=3, rows_m=0, mu_h=1.0)),
])
def test_step_inequalities_hold(kind, alg, make):
    worst = np.inf
    for seed in range(3):
        p = make(seed)
        snaps = []
        run(p, RunConfig(algorithm=alg, T=20), on_step=snaps.append)
        probes = sample_probes(p, np.random.default_rng(seed), 3)
        worst = min(worst, check_step_inequality(kind, p, snaps, probes))
    assert worst >= -1e-8


def test_lemma5_with_safe_metric():
    worst = np.inf
    for seed in range(3):
        p = gen_bilinear_qp(seed)
        snaps = []
        run(p, RunConfig(algorithm="egmm", T=20, egmm_metric="safe"), on_step=snaps.append)
        probes = sample_probes(p, np.random.default_rng(seed), 3)
        worst = min(worst, check_step_inequality("lemma5", p, snaps, probes, metric="safe"))
    assert worst >= -1e-8


def test_egmm_metric_values():
    p = gen_bilinear_qp(0)
    g = egmm_G(p, "theorem")
    assert g == pytest.approx(((p.L + p.norm_A) / 2, (p.L + p.norm_B) / 2, p.norm_A / 2, p.norm_B / 2))
    assert egmm_G(p, "safe") == pytest.approx(tuple(2 * v for v in g))


def test_snapshot_mismatch_rejected():
    p = gen_bilinear_qp(0)
    snaps = []
    run(p, RunConfig(algorithm="egmm", T=2), on_step=snaps.append)
    with pytest.raises(ValueError, match="needs snapshots"):
        check_step_inequality("lemma3", p, snaps, sample_probes(p, np.random.default_rng(0), 1))
    with pytest.raises(ValueError):
        check_step_inequality("lemma9", p, snaps, [])
