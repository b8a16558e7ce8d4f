import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from saddlekit.bench import (
    ConfigError, ExperimentConfig, RateFit, emit_svg, rate_fit, run_scenario, thread_cap,
)
from saddlekit.cli import main
from saddlekit.generators import gen_tiny

BILINEAR = {"generator": "bilinear_qp", "seed": 0, "params": {"rows_m": 0}}


def write_cfg(tmp_path, d, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return str(p)


# --- rate fit ----------------------------------------------------------------

def test_rate_fit_exact_slopes():
    assert rate_fit([(T, 7.0 / T) for T in (10, 20, 40)]).slope == pytest.approx(-1.0, abs=1e-12)
    assert rate_fit([(T, 3.0 / math.sqrt(T)) for T in (10, 20, 40)]).slope == pytest.approx(-0.5, abs=1e-12)


def test_rate_fit_errors():
    with pytest.raises(ValueError, match="index 1"):
        rate_fit([(10, 1.0), (20, 0.0), (40, 0.5)])
    with pytest.raises(ValueError):
        rate_fit([(10, 1.0), (20, 0.5)])


@settings(max_examples=50)
@given(st.lists(st.floats(1e-6, 1e3), min_size=3, max_size=8), st.integers(0, 2**31 - 1))
def test_rate_fit_recomputes(gaps, seed):
    Ts = np.cumsum(np.random.default_rng(seed).integers(1, 50, len(gaps)))
    fit = rate_fit(list(zip(Ts.tolist(), gaps)))
    s, i, r2 = fit.recompute()
    assert s == pytest.approx(fit.slope, abs=1e-10)
    assert i == pytest.approx(fit.intercept, abs=1e-10)
    u = np.array([p[0] for p in fit.points])
    v = np.array([p[1] for p in fit.points])
    if np.ptp(u) > 0:
        ref = np.polyfit(u, v, 1)
        assert fit.slope == pytest.approx(ref[0], abs=1e-8)
    assert isinstance(fit, RateFit)


# --- SVG ---------------------------------------------------------------------

def test_svg_examples(tmp_path):
    with pytest.raises(ValueError):
        emit_svg({"a": [(1, 1.0)]}, str(tmp_path / "x.svg"))
    with pytest.raises(ValueError):
        emit_svg({}, str(tmp_path / "x.svg"))
    pts = [(100, 0.5), (200, 0.26), (400, 0.12)]
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    emit_svg({"gap": pts}, str(a))
    emit_svg({"gap": pts}, str(b))
    assert a.read_bytes() == b.read_bytes()
    text = a.read_text()
    assert text.startswith("<svg") and ">T</text>" in text and ">penalty gap</text>" in text


def test_svg_rejects_nonpositive_on_log_axis(tmp_path):
    with pytest.raises(ValueError):
        emit_svg([(1, 0.0), (2, 1.0)], str(tmp_path / "x.svg"))
    emit_svg([(1, 0.0), (2, 1.0)], str(tmp_path / "x.svg"), logy=False)


# --- config ------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"scenario": "nope"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"scenario": "rates", "sweep": [10, 10, 20]})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"scenario": "rates", "sweep": [10, 20]})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"scenario": "single", "run": {"bogus": 1}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"scenario": "single", "extra": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict([1, 2])


def test_config_problem_from_path(tmp_path):
    (tmp_path / "prob.json").write_text(gen_tiny(2).to_json())
    path = write_cfg(tmp_path, {"scenario": "gap", "problem": {"path": "prob.json"}})
    cfg = ExperimentConfig.load(path)
    assert cfg.build_problem().to_json() == gen_tiny(2).to_json()


def test_thread_cap(monkeypatch):
    monkeypatch.delenv("SADDLEKIT_THREADS", raising=False)
    assert thread_cap() == 1
    monkeypatch.setenv("SADDLEKIT_THREADS", "3")
    assert thread_cap() == 3
    monkeypatch.setenv("SADDLEKIT_THREADS", "zero")
    with pytest.raises(ConfigError):
        thread_cap()


# --- scenarios and CLI -------------------------------------------------------

def test_cli_run_writes_trace(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"scenario": "single", "problem": {"generator": "bilinear_qp", "seed": 1},
                               "run": {"algorithm": "egmm", "T": 20}})
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out-dir", str(out), "--svg"]) == 0
    with open(out / "trace.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["iter", "res_x", "res_y", "dx_norm", "dy_norm", "gap", "wall_ms"]
    assert len(rows) == 21
    gap = json.loads((out / "gap.json").read_text())
    assert gap["penalty_gap"] == pytest.approx(
        gap["br_max"] - gap["br_min"] + gap["rho"] * (gap["res_x"] + gap["res_y"]), abs=1e-12)
    assert (out / "residuals.svg").exists()
    assert json.loads((out / "summary.json").read_text())["status"] == 0


def test_cli_rates_deterministic_and_fit(tmp_path, monkeypatch):
    d = {"scenario": "rates", "problem": BILINEAR, "run": {"algorithm": "seg_admm"},
         "sweep": [100, 200, 400, 800]}
    cfg = write_cfg(tmp_path, d)
    assert main(["rates", "--config", cfg, "--out-dir", str(tmp_path / "a"), "--svg"]) == 0
    monkeypatch.setenv("SADDLEKIT_THREADS", "4")
    assert main(["rates", "--config", cfg, "--out-dir", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "rates.csv").read_bytes()
    assert a == (tmp_path / "b" / "rates.csv").read_bytes()
    fit = json.loads((tmp_path / "a" / "ratefit.json").read_text())
    assert fit["slope"] <= -0.85
    svg = (tmp_path / "a" / "rates.svg").read_text()
    assert ">T</text>" in svg and ">penalty gap</text>" in svg


def test_cli_format_flag(tmp_path):
    cfg = write_cfg(tmp_path, {"scenario": "single", "problem": BILINEAR,
                               "run": {"algorithm": "seg_admm", "T": 5}})
    out = tmp_path / "o"
    assert main(["run", "--config", cfg, "--out-dir", str(out), "--format", "json"]) == 0
    assert (out / "trace.json").exists() and not (out / "trace.csv").exists()


def test_cli_seed_override(tmp_path):
    cfg = write_cfg(tmp_path, {"scenario": "gap", "problem": BILINEAR,
                               "run": {"algorithm": "seg_admm", "T": 5}})
    main(["gap", "--config", cfg, "--out-dir", str(tmp_path / "s0")])
    main(["gap", "--config", cfg, "--out-dir", str(tmp_path / "s1"), "--seed", "1"])
    g0 = json.loads((tmp_path / "s0" / "gap.json").read_text())
    g1 = json.loads((tmp_path / "s1" / "gap.json").read_text())
    assert g0["penalty_gap"] != g1["penalty_gap"]


def test_cli_gap_at_given_point(tmp_path):
    p = gen_tiny(0)
    x, y = p.feasible_point()
    cfg = write_cfg(tmp_path, {"scenario": "gap", "problem": {"generator": "tiny", "seed": 0},
                               "options": {"x": x.tolist(), "y": y.tolist()}})
    assert main(["gap", "--config", cfg, "--out-dir", str(tmp_path / "g")]) == 0
    bad = write_cfg(tmp_path, {"scenario": "gap", "problem": {"generator": "tiny", "seed": 0},
                               "options": {"x": [0.0]}}, "bad.json")
    assert main(["gap", "--config", bad, "--out-dir", str(tmp_path / "g2")]) == 1


def test_cli_config_errors(tmp_path, capsys):
    missing = str(tmp_path / "none.json")
    assert main(["run", "--config", missing]) == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "config" and err["exit_code"] == 1
    cfg = write_cfg(tmp_path, {"scenario": "rates", "problem": BILINEAR, "sweep": [100, 200]})
    out = tmp_path / "e"
    assert main(["rates", "--config", cfg, "--out-dir", str(out)]) == 1
    assert json.loads((out / "error.json").read_text())["exit_code"] == 1
    assert main(["nope"]) == 1
    assert main(["run"]) == 1
    bad_gen = write_cfg(tmp_path, {"scenario": "single", "problem": {"generator": "zzz"}}, "g.json")
    assert main(["run", "--config", bad_gen, "--out-dir", str(out)]) == 1


def test_cli_solver_error(tmp_path, capsys):
    # SSG-ADMM on a two-sided instance is unsupported
    cfg = write_cfg(tmp_path, {"scenario": "single", "problem": {"generator": "bilinear_qp", "seed": 0},
                               "run": {"algorithm": "ssg_admm", "T": 5}})
    assert main(["run", "--config", cfg, "--out-dir", str(tmp_path / "s")]) == 2
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"] == "solver"


def test_cli_certify_codes(tmp_path):
    base = {"scenario": "certify", "options": {"seeds": [0, 1], "pairs": 10, "probes": 2}}
    ok = write_cfg(tmp_path, {**base, "options": {**base["options"],
                                                  "kinds": ["lemma2", "lemma3", "lemma4", "lemma7"]}})
    assert main(["certify", "--config", ok, "--out-dir", str(tmp_path / "c")]) == 0
    summ = json.loads((tmp_path / "c" / "slacks.json").read_text())
    assert summ["passed"] and summ["overall_min"] >= -1e-8
    safe = write_cfg(tmp_path, {**base, "options": {**base["options"], "kinds": ["lemma5"],
                                                    "metric": "safe"}}, "safe.json")
    assert main(["certify", "--config", safe, "--out-dir", str(tmp_path / "s")]) == 0
    # with the stated metric the EGMM inequality fails on these instances: exit 3
    thm = write_cfg(tmp_path, {**base, "options": {**base["options"], "kinds": ["lemma5"]}}, "t.json")
    assert main(["certify", "--config", thm, "--out-dir", str(tmp_path / "t")]) == 3
    assert json.loads((tmp_path / "t" / "error.json").read_text())["exit_code"] == 3


def test_cli_compare(tmp_path):
    cfg = write_cfg(tmp_path, {"scenario": "compare", "sweep": [20, 40, 80], "run": {"rho_report": 10.0}})
    assert main(["compare", "--config", cfg, "--out-dir", str(tmp_path / "c"), "--svg"]) == 0
    with open(tmp_path / "c" / "compare.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["T", "gap_admm_min", "gap_egmm"] and len(rows) == 4
    assert all(float(r[1]) >= 0 and float(r[2]) >= 0 for r in rows[1:])


def test_cli_divergence_small_budget(tmp_path):
    cfg = write_cfg(tmp_path, {"scenario": "divergence",
                               "options": {"egmm_T": 2000, "perturbed_T": 0}})
    assert main(["divergence", "--config", cfg, "--out-dir", str(tmp_path / "d")]) == 0
    s = json.loads((tmp_path / "d" / "divergence.json").read_text())
    assert s["admm_diverged"] and s["admm_first_10x_iter"] <= 1000
    assert s["egmm_gap"] < s["initial_residual"]


def test_conic_config(tmp_path):
    cfg = ExperimentConfig.from_dict({"scenario": "single",
                                      "problem": {"generator": "conic_qp", "seed": 0, "conic": True},
                                      "run": {"algorithm": "egmm", "T": 10}})
    res = run_scenario(cfg, str(tmp_path / "k"))
    assert res["status"] == 0


def test_module_entry_point(tmp_path):
    cfg = write_cfg(tmp_path, {"scenario": "single", "problem": BILINEAR,
                               "run": {"algorithm": "seg_admm", "T": 3}})
    r = subprocess.run([sys.executable, "-m", "saddlekit", "run", "--config", cfg,
                        "--out-dir", str(tmp_path / "m")], capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["status"] == 0
