"""Command-line interface: ``tapersum <subcommand> [options]``.

Every subcommand accepts ``--config FILE`` (see :mod:`tapersum.config`);
explicit flags override the file. Output files land in ``--output-dir``, else
``$TAPERSUM_OUTPUT_DIR``, else the configured directory.

Exit codes: 0 success or all checks passed, 1 a verification check failed,
2 usage, configuration or parameter error.

Files written by ``simulate``: ``ensemble.csv`` (header
``replicate,t=<t_1>,...``; format version in the manifest), ``ensemble.json``
(values plus plan echo) and ``manifest.json`` (plan, b, seed, version,
backend, wall time, file checksums). ``sample`` writes ``samples.csv``;
``verify`` writes ``verify_<suite>.json``.
"""

import argparse
import glob
import hashlib
import json
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__, config as cfgmod, io
from ._accel import BACKEND
from .distributions import (
    TaperedParetoParams,
    centered_innovation_variance,
    sample_coupled,
    tp_mean,
    tp_moment_asymptotic,
    tp_moment_exact,
    tp_moment_quad,
    tp_sample,
)
from .engine import Normalization, SimulationPlan, default_plan, simulate
from .errors import TaperSumError
from .filters import FilterSpec
from .regimes import RegimeParams, classify
from .rng import stream

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _emit(obj):
    json.dump(obj, sys.stdout, indent=2, sort_keys=True, default=str)
    sys.stdout.write("\n")


def _outdir(args, cfg):
    path = cfg.resolved_output_dir(args.output_dir)
    os.makedirs(path, exist_ok=True)
    return path


def _sha256(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _override(section, args, names):
    vals = {k: getattr(args, k) for k in names if getattr(args, k, None) is not None}
    return replace(section, **vals)


# -- subcommands ---------------------------------------------------------------

def cmd_moments(args, cfg):
    m = _override(cfg.moments, args, ("alpha", "b", "r"))
    p = TaperedParetoParams(m.alpha, m.b)
    rows = []
    for r in m.r:
        row = {"r": r, "exact": tp_moment_exact(p, r), "quadrature": tp_moment_quad(p, r)}
        try:
            row["asymptotic"] = tp_moment_asymptotic(p, r)
        except TaperSumError as exc:
            row["asymptotic"] = None
            row["note"] = str(exc)
        rows.append(row)
    _emit({"alpha": p.alpha, "b": p.b, "mean": tp_mean(p),
           "centered_variance": centered_innovation_variance(p), "moments": rows})
    return EXIT_OK


def cmd_sample(args, cfg):
    s = _override(cfg.sample, args, ("alpha", "b", "size", "coupled"))
    p = TaperedParetoParams(s.alpha, s.b)
    rng = stream(cfg.seed, 0)
    out = _outdir(args, cfg)
    path = os.path.join(out, "samples.csv")
    if s.coupled:
        c = sample_coupled(p, rng, s.size)
        cols, data = ["tapered", "pareto"], np.column_stack([c.zeta, c.theta])
    else:
        cols, data = ["tapered"], tp_sample(p, rng, s.size)[:, None]
    with open(path, "w") as fh:
        fh.write(",".join(["draw"] + cols) + "\n")
        for i, row in enumerate(data):
            fh.write(",".join([str(i)] + ["%.17g" % v for v in row]) + "\n")
    _emit({"file": path, "size": s.size, "seed": cfg.seed, "mean": float(data[:, 0].mean())})
    return EXIT_OK


def cmd_classify(args, cfg):
    c = _override(cfg.classify, args, ("alpha", "beta", "gamma"))
    if args.zero_sum:
        c = replace(c, zero_sum=True)
    _emit(classify(RegimeParams(c.alpha, c.beta, c.gamma, c.zero_sum)).to_dict())
    return EXIT_OK


def build_plan(sim, seed):
    f = FilterSpec.from_dict(sim.filter)
    norm = Normalization(sim.normalization)
    if sim.truncation_J is None:
        return default_plan(sim.alpha, sim.gamma, f, sim.n, tuple(sim.t_grid), sim.replicates,
                            seed, norm)
    return SimulationPlan(sim.alpha, sim.gamma, f, sim.n, tuple(sim.t_grid), sim.replicates,
                          sim.truncation_J, seed, norm)


def cmd_simulate(args, cfg):
    sim = _override(cfg.simulate, args, ("n", "replicates", "normalization", "method"))
    t0 = time.perf_counter()
    plan = build_plan(sim, cfg.seed)
    ens = simulate(plan, workers=cfg.workers, method=sim.method)
    out = _outdir(args, cfg)
    files = {}
    if "csv" in cfg.formats:
        files["csv"] = os.path.join(out, "ensemble.csv")
        ens.to_csv(files["csv"])
    if "json" in cfg.formats:
        files["json"] = os.path.join(out, "ensemble.json")
        ens.to_json(files["json"])
    manifest = {
        "format_version": io.FORMAT_VERSION,
        "version": __version__,
        "backend": BACKEND,
        "seed": cfg.seed,
        "workers": cfg.workers,
        "plan": plan.to_dict(),
        "b": plan.b,
        "normalization_used": ens.normalization_used,
        "method": ens.meta["method"],
        "wall_time_s": time.perf_counter() - t0,
        "files": {k: {"path": os.path.basename(v), "sha256": _sha256(v)} for k, v in files.items()},
    }
    io.write_json(os.path.join(out, "manifest.json"), manifest)
    _emit({"manifest": os.path.join(out, "manifest.json"), **manifest})
    return EXIT_OK


def cmd_verify(args, cfg):
    from .verify import SUITES, run_suite

    v = _override(cfg.verify, args, ("suite",))
    if args.fast:
        v = replace(v, fast=True)
    if v.suite not in SUITES:
        raise UsageError(f"unknown suite {v.suite!r}; choose from {sorted(SUITES)}")
    res = run_suite(v.suite, fast=v.fast, seed=cfg.seed, workers=cfg.workers)
    doc = res.to_dict()
    out = _outdir(args, cfg)
    io.write_json(os.path.join(out, f"verify_{v.suite}.json"), doc)
    for r in res.reports:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  value={r.value!r}  "
              f"threshold={r.threshold!r}", file=sys.stderr)
    _emit(doc)
    return EXIT_OK if res.passed else EXIT_FAIL


def cmd_report(args, cfg):
    src = args.input_dir or cfg.report.input_dir or cfg.resolved_output_dir(args.output_dir)
    paths = sorted(glob.glob(os.path.join(src, "verify_*.json")))
    if not paths:
        raise UsageError(f"no verify_*.json files under {src}")
    suites = []
    for p in paths:
        with open(p) as fh:
            doc = json.load(fh)
        n_pass = sum(r["passed"] for r in doc["reports"])
        suites.append({"suite": doc["suite"], "passed": doc["passed"], "fast": doc["fast"],
                       "checks": len(doc["reports"]), "checks_passed": n_pass,
                       "failed": [r["name"] for r in doc["reports"] if not r["passed"]]})
    ok = all(s["passed"] for s in suites)
    _emit({"input_dir": src, "passed": ok, "suites": suites})
    return EXIT_OK if ok else EXIT_FAIL


# -- parser ----------------------------------------------------------------------

def _floats(text):
    return [float(x) for x in text.split(",")]


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--output-dir", help=f"overrides ${cfgmod.OUTPUT_DIR_ENV} and the config")
    common.add_argument("--formats", type=lambda s: s.split(","), help="comma list of csv,json")

    parser = argparse.ArgumentParser(prog="tapersum", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("moments", parents=[common], help="tapered Pareto moments")
    p.add_argument("--alpha", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--r", type=_floats, help="comma list of moment orders")

    p = sub.add_parser("sample", parents=[common], help="draw tapered Pareto variates")
    p.add_argument("--alpha", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--size", type=int)
    p.add_argument("--coupled", action="store_true", default=None)

    p = sub.add_parser("classify", parents=[common], help="regime verdict as JSON")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--zero-sum", action="store_true")

    p = sub.add_parser("simulate", parents=[common], help="simulate partial-sum ensembles")
    p.add_argument("--n", type=int)
    p.add_argument("--replicates", type=int)
    p.add_argument("--normalization", choices=[m.value for m in Normalization])
    p.add_argument("--method", choices=["auto", "dcoef", "conv"])

    p = sub.add_parser("verify", parents=[common], help="run a verification suite")
    p.add_argument("suite", nargs="?")
    p.add_argument("--fast", action="store_true")

    p = sub.add_parser("report", parents=[common], help="summarize verify_*.json files")
    p.add_argument("--input-dir")
    return parser


_COMMANDS = {"moments": cmd_moments, "sample": cmd_sample, "classify": cmd_classify,
             "simulate": cmd_simulate, "verify": cmd_verify, "report": cmd_report}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = cfgmod.load(args.config) if args.config else cfgmod.RunConfig()
        glob_over = {k: getattr(args, k) for k in ("seed", "workers", "formats")
                     if getattr(args, k) is not None}
        if glob_over:
            cfg = cfgmod.RunConfig.from_dict({**cfg.to_dict(), **glob_over})
        return _COMMANDS[args.command](args, cfg)
    except (UsageError, cfgmod.ConfigError, TaperSumError, ValueError) as exc:
        print(f"tapersum {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
