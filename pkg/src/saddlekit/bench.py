"""Config-driven experiments: single runs, T-sweeps with rate fits, lemma
slack suites, ADMM-vs-EGMM comparison on a minimization instance, the
divergence/repair scenario, and CSV/JSON/SVG artifacts.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import generators
from .certify import LEMMA_KINDS, check_step_inequality, penalty_gap, sample_probes
from .problem import SaddleProblem, conic_to_equality
from .solvers import RunConfig, run, run_admm_min, run_perturbed

__all__ = [
    "ConfigError", "ExperimentConfig", "RateFit", "rate_fit", "emit_svg", "run_scenario",
    "SCENARIOS", "SLACK_TOL", "thread_cap",
]

SCENARIOS = ("single", "rates", "certify", "compare", "divergence", "gap")
SLACK_TOL = -1e-8

# instance and algorithm used for each lemma kind in the certify suite
LEMMA_SETUPS = {
    "lemma2": ({"generator": "bilinear_qp", "params": {"rows_m": 0}}, "seg_admm"),
    "lemma3": ({"generator": "pwl_saddle", "params": {}}, "ssg_admm"),
    "lemma4": ({"generator": "bilinear_qp", "params": {"rows_m": 0}}, "seg_admm"),
    "lemma5": ({"generator": "bilinear_qp", "params": {}}, "egmm"),
    "lemma7": ({"generator": "bilinear_qp", "params": {"n_blocks_x": 3, "rows_m": 0, "mu_h": 1.0}},
               "seg_admm"),
}


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


def thread_cap():
    """Parallelism cap from SADDLEKIT_THREADS (default 1)."""
    raw = os.environ.get("SADDLEKIT_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"SADDLEKIT_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("SADDLEKIT_THREADS must be >= 1")
    return n


@dataclass
class ExperimentConfig:
    """One experiment, loaded from a single JSON file.

    ``problem`` is either ``{"generator": id, "seed": s, "params": {...}}`` or
    ``{"path": "problem.json"}``; ``"conic": true`` applies the conic
    reformulation. ``run`` holds RunConfig fields. ``sweep`` is a strictly
    increasing list of T values for the rates scenario. ``options`` holds
    scenario-specific settings.
    """

    scenario: str
    problem: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)
    sweep: list = field(default_factory=list)
    out_dir: str = "out"
    emit: dict = field(default_factory=lambda: {"csv": True, "json": True, "svg": False})
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if self.sweep:
            Ts = [int(t) for t in self.sweep]
            if any(t < 1 for t in Ts) or any(b <= a for a, b in zip(Ts, Ts[1:])):
                raise ConfigError("sweep must be a strictly increasing list of positive T")
            self.sweep = Ts
        if self.scenario == "rates" and len(self.sweep) < 3:
            raise ConfigError("rates scenario needs a sweep of at least 3 values")
        known = {f.name for f in fields(RunConfig)}
        bad = set(self.run) - known
        if bad:
            raise ConfigError(f"unknown run fields: {sorted(bad)}")
        self.emit = {"csv": True, "json": True, "svg": False, **(self.emit or {})}

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        allowed = {f.name for f in fields(cls)}
        bad = set(d) - allowed
        if bad:
            raise ConfigError(f"unknown config keys: {sorted(bad)}")
        if "scenario" not in d:
            raise ConfigError("config needs a 'scenario'")
        return cls(**d)

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        cfg = cls.from_dict(d)
        base = os.path.dirname(os.path.abspath(path))
        if "path" in cfg.problem and not os.path.isabs(cfg.problem["path"]):
            cfg.problem = dict(cfg.problem, path=os.path.join(base, cfg.problem["path"]))
        return cfg

    def to_dict(self):
        return asdict(self)

    def build_problem(self, seed=None):
        desc = dict(self.problem)
        if not desc:
            raise ConfigError("config has no problem")
        try:
            if "path" in desc:
                with open(desc["path"]) as fh:
                    prob = SaddleProblem.from_json(fh.read())
            else:
                if seed is not None:
                    desc["seed"] = seed
                prob = generators.generate(desc)
        except (OSError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"cannot build problem: {exc}") from exc
        if desc.get("conic"):
            prob = conic_to_equality(prob)
        return prob

    def run_config(self, **over):
        try:
            return RunConfig(**{**self.run, **over})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad run config: {exc}") from exc


# ---------------------------------------------------------------------------
# Rate fit
# ---------------------------------------------------------------------------

@dataclass
class RateFit:
    points: list
    slope: float
    intercept: float
    r2: float

    @staticmethod
    def ols(points):
        u = np.array([p[0] for p in points], dtype=float)
        v = np.array([p[1] for p in points], dtype=float)
        X = np.column_stack([u, np.ones_like(u)])
        (slope, intercept), *_ = np.linalg.lstsq(X, v, rcond=None)
        resid = v - (slope * u + intercept)
        ss = float(np.sum((v - v.mean()) ** 2))
        r2 = 1.0 - float(resid @ resid) / ss if ss > 0 else 1.0
        return float(slope), float(intercept), r2

    def recompute(self):
        return self.ols(self.points)

    def to_dict(self):
        return asdict(self)


def rate_fit(pairs):
    """Least-squares line through (log T, log gap).

    Raises
    ------
    ValueError
        Fewer than 3 points or a nonpositive gap (the offending index is named).
    """
    pairs = list(pairs)
    if len(pairs) < 3:
        raise ValueError("rate_fit needs at least 3 points")
    pts = []
    for i, (T, g) in enumerate(pairs):
        if not g > 0:
            raise ValueError(f"gap at index {i} is nonpositive ({g!r}); cannot take log")
        if not T > 0:
            raise ValueError(f"T at index {i} is nonpositive ({T!r})")
        pts.append((math.log(T), math.log(g)))
    return RateFit(pts, *RateFit.ols(pts))


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v):
    return f"{v:.6g}"


def emit_svg(series, path, *, xlabel="T", ylabel="penalty gap", logx=True, logy=True, title=None):
    """Write a self-contained line plot.

    Parameters
    ----------
    series : dict or list
        ``{name: [(x, y), ...]}`` or a single list of pairs.
    path : str
        Output file, written atomically.

    The output depends only on the input, so identical input gives identical
    bytes.
    """
    if not isinstance(series, dict):
        series = {"series": series}
    if not series:
        raise ValueError("empty series")
    data = {}
    for name, pts in series.items():
        pts = [(float(x), float(y)) for x, y in pts]
        if len(pts) < 2:
            raise ValueError(f"series {name!r} needs at least 2 points")
        for x, y in pts:
            if (logx and x <= 0) or (logy and y <= 0) or not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError(f"series {name!r} has a point not representable on the axes: {(x, y)}")
        data[name] = [(math.log10(x) if logx else x, math.log10(y) if logy else y) for x, y in pts]
    xs = [p[0] for v in data.values() for p in v]
    ys = [p[1] for v in data.values() for p in v]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    W, H, ml, mr, mt, mb = 480, 360, 70, 20, 30, 50
    sx = lambda x: ml + (x - x0) / (x1 - x0) * (W - ml - mr)
    sy = lambda y: H - mb - (y - y0) / (y1 - y0) * (H - mt - mb)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<line x1="{ml}" y1="{H - mb}" x2="{W - mr}" y2="{H - mb}" stroke="black"/>',
           f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{H - mb}" stroke="black"/>']
    for frac in (0.0, 0.5, 1.0):
        xv = x0 + frac * (x1 - x0)
        yv = y0 + frac * (y1 - y0)
        xl = _fmt(10 ** xv if logx else xv)
        yl = _fmt(10 ** yv if logy else yv)
        out.append(f'<text x="{_fmt(sx(xv))}" y="{H - mb + 16}" font-size="11" text-anchor="middle">{xl}</text>')
        out.append(f'<text x="{ml - 6}" y="{_fmt(sy(yv) + 4)}" font-size="11" text-anchor="end">{yl}</text>')
    out.append(f'<text x="{(W + ml) // 2}" y="{H - 10}" font-size="13" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="16" y="{H // 2}" font-size="13" text-anchor="middle" '
               f'transform="rotate(-90 16 {H // 2})">{ylabel}</text>')
    if title:
        out.append(f'<text x="{W // 2}" y="18" font-size="13" text-anchor="middle">{title}</text>')
    for k, (name, pts) in enumerate(data.items()):
        col = _COLORS[k % len(_COLORS)]
        d = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.5" points="{d}"/>')
        out.append(f'<text x="{W - mr - 4}" y="{mt + 14 * (k + 1)}" font-size="11" fill="{col}" '
                   f'text-anchor="end">{name}</text>')
    out.append("</svg>\n")
    _write_atomic(path, "\n".join(out))


def _write_atomic(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _rows_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _dump(path, obj):
    _write_atomic(path, json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------

def _gap(problem, xb, yb, cfg, rc):
    tol = float(cfg.options.get("gap_tol", rc.gap_tol))
    return penalty_gap(problem, xb, yb, rc.rho_report, tol=tol, strict=True)


def _pmap(fn, items):
    n = thread_cap()
    if n == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))  # results come back in input order


def scenario_single(cfg):
    prob = cfg.build_problem()
    rc = cfg.run_config()
    xb, yb, tr = run(prob, rc)
    rep = _gap(prob, xb, yb, cfg, rc)
    tr.final_gap = rep.to_dict()
    files = {}
    if cfg.emit.get("csv"):
        files["trace.csv"] = tr.to_csv()
    if cfg.emit.get("json"):
        files["trace.json"] = tr.to_json() + "\n"
        files["gap.json"] = rep.to_json() + "\n"
    svg = None
    if cfg.emit.get("svg") and len(tr.rows) >= 2:
        it = tr.column("iter")
        series = {}
        for name in ("res_x", "res_y"):
            col = tr.column(name)
            pts = [(i, r) for i, r in zip(it, col) if r > 0]
            if len(pts) >= 2:
                series[name] = pts
        if series:
            svg = ("residuals.svg", series, dict(xlabel="iteration", ylabel="residual"))
    return {"summary": {"penalty_gap": rep.penalty_gap, "gap_rho1": rep.gap_rho1,
                        "converged": rep.converged, "steps": tr.steps.to_dict()},
            "files": files, "svg": svg, "status": 0}


def scenario_rates(cfg):
    prob = cfg.build_problem()
    variant = cfg.options.get("perturbed")

    def one(T):
        rc = cfg.run_config(T=T)
        if variant:
            xb, yb, tr = run_perturbed(variant, prob, rc, c=float(cfg.options.get("c", 1.0)))
        else:
            xb, yb, tr = run(prob, rc)
        rep = _gap(prob, xb, yb, cfg, rc)
        return T, rep

    results = _pmap(one, cfg.sweep)
    rows = [(T, rep.penalty_gap, rep.gap_rho1, rep.res_x, rep.res_y) for T, rep in results]
    fit = rate_fit([(T, g) for T, g, *_ in rows])
    files = {}
    if cfg.emit.get("csv"):
        files["rates.csv"] = _rows_csv(("T", "gap", "gap_rho1", "res_x", "res_y"), rows)
    if cfg.emit.get("json"):
        files["ratefit.json"] = json.dumps(fit.to_dict(), sort_keys=True) + "\n"
    svg = ("rates.svg", {"penalty gap": [(T, g) for T, g, *_ in rows]}, {}) if cfg.emit.get("svg") else None
    return {"summary": {"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2,
                        "gaps": [g for _, g, *_ in rows], "T": list(cfg.sweep)},
            "files": files, "svg": svg, "status": 0}


def certify_suite(kinds=LEMMA_KINDS, seeds=range(20), pairs=50, probes=5, metric="theorem",
                  problem=None):
    """Minimum slack per lemma kind over seeds x consecutive iteration pairs.

    Each kind runs its matching algorithm with default (theorem) step sizes
    on its default instance family unless ``problem`` (a generator description)
    overrides it.
    """
    out = {}
    for kind in kinds:
        if kind not in LEMMA_SETUPS:
            raise ConfigError(f"unknown lemma kind {kind!r}")
        desc, alg = LEMMA_SETUPS[kind]
        worst = math.inf
        for seed in seeds:
            prob = generators.generate({**(problem or desc), "seed": int(seed)})
            snaps = []
            run(prob, RunConfig(algorithm=alg, T=pairs, egmm_metric=metric), on_step=snaps.append)
            pr = sample_probes(prob, np.random.default_rng(int(seed)), probes)
            worst = min(worst, check_step_inequality(kind, prob, snaps, pr, metric=metric))
        out[kind] = worst
    return out


def scenario_certify(cfg):
    o = cfg.options
    kinds = o.get("kinds", list(LEMMA_KINDS))
    seeds = o.get("seeds", list(range(20)))
    metric = o.get("metric", "theorem")
    if metric not in ("theorem", "safe"):
        raise ConfigError("metric must be 'theorem' or 'safe'")
    slacks = certify_suite(kinds, seeds, int(o.get("pairs", 50)), int(o.get("probes", 5)), metric,
                           problem=cfg.problem or None)
    ok = all(v >= SLACK_TOL for v in slacks.values())
    summary = {"min_slack": slacks, "overall_min": min(slacks.values()), "passed": ok,
               "tolerance": SLACK_TOL, "metric": metric, "seeds": list(seeds)}
    files = {"slacks.json": json.dumps(summary, sort_keys=True) + "\n"} if cfg.emit.get("json") else {}
    return {"summary": summary, "files": files, "svg": None, "status": 0 if ok else 3}


def scenario_compare(cfg):
    desc = cfg.problem or {"generator": "min_qp", "seed": 0}
    prob = generators.generate(desc) if "path" not in desc else cfg.build_problem()
    checkpoints = cfg.sweep or [25, 50, 100, 200, 400, 800]
    rc = cfg.run_config()
    rows = []

    def one(T):
        xa, _ = run_admm_min(prob, RunConfig(**{**cfg.run, "algorithm": "admm_min", "T": T}))
        xe, ye, _ = run(prob, RunConfig(**{**cfg.run, "algorithm": "egmm", "T": T}))
        ga = penalty_gap(prob, xa, np.zeros(prob.dy), rc.rho_report).penalty_gap
        ge = penalty_gap(prob, xe, ye, rc.rho_report).penalty_gap
        return T, ga, ge

    rows = _pmap(one, list(checkpoints))
    files = {"compare.csv": _rows_csv(("T", "gap_admm_min", "gap_egmm"), rows)} if cfg.emit.get("csv") else {}
    svg = None
    if cfg.emit.get("svg"):
        series = {}
        for j, name in ((1, "admm_min"), (2, "egmm")):
            pts = [(r[0], r[j]) for r in rows if r[j] > 0]
            if len(pts) >= 2:
                series[name] = pts
        svg = ("compare.svg", series, {}) if series else None
    return {"summary": {"T": [r[0] for r in rows], "admm_min": [r[1] for r in rows],
                        "egmm": [r[2] for r in rows]},
            "files": files, "svg": svg, "status": 0}


def scenario_divergence(cfg):
    """Plain ADMM diverges on a 3-block instance; EGMM and perturbed SEG-ADMM repair it."""
    o = cfg.options
    prob = cfg.build_problem() if cfg.problem else generators.gen_divergent_admm()
    T_admm = int(o.get("admm_T", 1000))
    T_egmm = int(o.get("egmm_T", 5000))
    T_pert = int(o.get("perturbed_T", 100000))
    target = float(o.get("target_gap", 1e-2))
    rho = float(cfg.run.get("rho_report", 10.0))
    x0 = prob.center_x()
    r0 = float(np.linalg.norm(prob.residual_x(x0)))
    _, tr = run_admm_min(prob, RunConfig(algorithm="admm_min", T=T_admm, x0=x0))
    res = tr.column("res_x")
    grew = bool(np.any(res > 10 * r0))
    first = int(np.argmax(res > 10 * r0)) + 1 if grew else None
    metric = o.get("egmm_metric", "safe")
    xe, ye, _ = run(prob, RunConfig(algorithm="egmm", T=T_egmm, egmm_metric=metric, x0=x0))
    ge = penalty_gap(prob, xe, ye, rho).penalty_gap
    summary = {"initial_residual": r0, "admm_max_residual": float(res.max()), "admm_diverged": grew,
               "admm_first_10x_iter": first, "egmm_metric": metric, "egmm_gap": ge,
               "egmm_ok": ge <= target}
    if T_pert > 0:
        xp, yp, _ = run_perturbed("seg", prob, RunConfig(algorithm="seg_admm", T=T_pert, x0=x0))
        gp = penalty_gap(prob, xp, yp, rho).penalty_gap
        summary.update(perturbed_gap=gp, perturbed_ok=gp <= target)
    files = {}
    if cfg.emit.get("csv"):
        files["admm_trace.csv"] = tr.to_csv()
    if cfg.emit.get("json"):
        files["divergence.json"] = json.dumps(summary, sort_keys=True) + "\n"
    svg = None
    if cfg.emit.get("svg"):
        svg = ("admm_residual.svg", {"res_x": list(zip(tr.column("iter"), res))},
               dict(xlabel="iteration", ylabel="residual"))
    return {"summary": summary, "files": files, "svg": svg, "status": 0}


def scenario_gap(cfg):
    """Certify a given point (options x, y) or the output of the configured run."""
    prob = cfg.build_problem()
    rc = cfg.run_config()
    o = cfg.options
    if "x" in o:
        xb = np.asarray(o["x"], dtype=float)
        yb = np.asarray(o.get("y", []), dtype=float)
        if xb.size != prob.dx or yb.size != prob.dy:
            raise ConfigError("point dimensions do not match the problem")
    else:
        xb, yb, _ = run(prob, rc)
    rep = _gap(prob, xb, yb, cfg, rc)
    files = {"gap.json": rep.to_json() + "\n"} if cfg.emit.get("json") else {}
    return {"summary": rep.to_dict(), "files": files, "svg": None, "status": 0}


_DISPATCH = {
    "single": scenario_single, "rates": scenario_rates, "certify": scenario_certify,
    "compare": scenario_compare, "divergence": scenario_divergence, "gap": scenario_gap,
}


def run_scenario(cfg, out_dir=None):
    """Execute the configured scenario and write its artifacts.

    Returns
    -------
    dict
        ``{"summary": ..., "files": [written paths], "status": exit status}``.
    """
    res = _DISPATCH[cfg.scenario](cfg)
    out_dir = out_dir or cfg.out_dir
    written = []
    for name, text in sorted(res["files"].items()):
        p = os.path.join(out_dir, name)
        _write_atomic(p, text)
        written.append(p)
    if res.get("svg"):
        name, series, kw = res["svg"]
        p = os.path.join(out_dir, name)
        emit_svg(series, p, **kw)
        written.append(p)
    summary_path = os.path.join(out_dir, "summary.json")
    _dump(summary_path, {"scenario": cfg.scenario, "status": res["status"], "summary": res["summary"]})
    written.append(summary_path)
    return {"summary": res["summary"], "files": written, "status": res["status"]}
