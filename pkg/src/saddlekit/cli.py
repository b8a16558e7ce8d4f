"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 solver error, 3 failed
certification. Every error is also written to stderr (and to
``error.json`` in the output directory) as a JSON diagnostic.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .bench import ConfigError, ExperimentConfig, run_scenario
from .certify import CertificationError
from .linalg import ProxError
from .solvers import SolverError

SUBCOMMANDS = {
    "run": "single", "rates": "rates", "certify": "certify",
    "compare": "compare", "divergence": "divergence", "gap": "gap",
}

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CERT = 0, 1, 2, 3


def build_parser():
    ap = argparse.ArgumentParser(prog="saddlekit", description="Saddle-point solver experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment JSON file")
        p.add_argument("--out-dir", default=None, help="output directory (overrides the config)")
        p.add_argument("--format", choices=("csv", "json", "both"), default=None,
                       help="tabular artifact format")
        p.add_argument("--svg", action="store_true", help="also write SVG plots")
        p.add_argument("--seed", type=int, default=None, help="override the problem seed")
    return ap


def _diagnostic(kind, exc, code, out_dir):
    diag = {"error": kind, "message": str(exc), "exit_code": code}
    text = json.dumps(diag, sort_keys=True)
    print(text, file=sys.stderr)
    if out_dir:
        try:
            os.makedirs(out_dir, exist_ok=True)
            with open(os.path.join(out_dir, "error.json"), "w") as fh:
                fh.write(text + "\n")
        except OSError:
            pass
    return code


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    out_dir = args.out_dir
    try:
        cfg = ExperimentConfig.load(args.config)
        scenario = SUBCOMMANDS[args.command]
        if cfg.scenario != scenario:
            cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "scenario": scenario})
        if args.seed is not None:
            cfg.problem = {**cfg.problem, "seed": args.seed}
        if args.format:
            cfg.emit = {**cfg.emit, "csv": args.format in ("csv", "both"),
                        "json": args.format in ("json", "both")}
        if args.svg:
            cfg.emit = {**cfg.emit, "svg": True}
        out_dir = out_dir or cfg.out_dir
        result = run_scenario(cfg, out_dir)
    except ConfigError as exc:
        return _diagnostic("config", exc, EXIT_CONFIG, out_dir)
    except CertificationError as exc:
        return _diagnostic("certification", exc, EXIT_SOLVER, out_dir)
    except (SolverError, ProxError, FloatingPointError) as exc:
        return _diagnostic("solver", exc, EXIT_SOLVER, out_dir)
    print(json.dumps({"status": result["status"], "files": result["files"]}, sort_keys=True))
    if result["status"] == EXIT_CERT:
        return _diagnostic("certification", "lemma slack below tolerance", EXIT_CERT, out_dir)
    return result["status"]


if __name__ == "__main__":
    sys.exit(main())
