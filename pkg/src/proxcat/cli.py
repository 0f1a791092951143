"""Command-line experiment runner.

Subcommands
-----------
run     PPA and/or flow run described by a JSON config.
mean    Fréchet mean (p=2) or geometric median (p=1) of a points file.
verify  Sampled invariant suites of the geometry and functionals modules.

Exit codes: 0 when every requested certificate passes, 2 on a certificate
failure, 1 on a validation or solver error.  ``PROX_LOG`` sets verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import __version__
from .diagnostics import SequenceWindow, weak_convergence_check
from .errors import ProxError, ValidationError
from .flow import flow_convergence_run
from .functionals import Distance, SquaredDistance, WeightedSum
from .geometry import space_from_json
from .invariants import run_suites
from .io import config_hash, load_config, load_json, load_points, write_json
from .ppa import StepSchedule, StopRule, run_ppa
from .report import FAIL, INCONCLUSIVE
from .resolvent import ResolventOptions

EXIT_OK, EXIT_ERROR, EXIT_CERT = 0, 1, 2
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
BAD = (FAIL, INCONCLUSIVE)

log = logging.getLogger("proxcat")


def _setup_logging():
    level = LOG_LEVELS.get(os.environ.get("PROX_LOG", "error").strip().lower(), logging.ERROR)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    logging.getLogger("proxcat").setLevel(level)


def _rngs(seed: int, n: int):
    """Independent generators split deterministically from one seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _verdicts(certs: dict, prefix: str = "") -> dict:
    return {prefix + k: v.status for k, v in certs.items()}


def _exit_for(verdicts: dict) -> int:
    return EXIT_CERT if any(v in BAD for v in verdicts.values()) else EXIT_OK


def _failures(certs: dict, prefix: str):
    for k, v in certs.items():
        if v.status in BAD:
            print(f"certificate {prefix}{k}: {v.status} (worst residual {v.worst_residual:.3e} "
                  f"at index {v.worst_index})", file=sys.stderr)


def _manifest(out: str, chash: str, verdicts: dict, files: list, seed: int):
    man = {"config_hash": chash, "artifact_version": __version__, "seed": seed,
           "verdicts": verdicts, "outputs": sorted(files)}
    write_json(os.path.join(out, "manifest.json"), man)
    return man


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    out = args.out or cfg.output or "out"
    os.makedirs(out, exist_ok=True)
    (diag_rng,) = _rngs(seed, 1)
    report = {"config_hash": cfg.hash, "algorithm": cfg.algorithm}
    verdicts, files = {}, []
    if cfg.algorithm in ("ppa", "both"):
        try:
            trace = run_ppa(cfg.functional, cfg.start, cfg.schedule, cfg.stop, cfg.resolvent)
        except ProxError as exc:
            raise type(exc)(f"ppa: {exc}") from exc
        path = os.path.join(out, "trace.csv")
        with open(path, "w", newline="") as fh:
            fh.write(trace.to_csv())
        files.append("trace.csv")
        summary = trace.summary()
        win = SequenceWindow.from_trace(trace)
        weak = weak_convergence_check(win, trace.iterates[-1], rng=diag_rng)
        summary["diagnostics"] = {"weak_convergence_to_final": weak.to_json(cfg.space)}
        report["ppa"] = summary
        verdicts.update(_verdicts(trace.certificates, "ppa."))
        _failures(trace.certificates, "ppa.")
    if cfg.algorithm in ("flow", "both"):
        try:
            ftrace = flow_convergence_run(cfg.functional, cfg.start, cfg.lambda_grid, cfg.flow)
        except ProxError as exc:
            raise type(exc)(f"flow: {exc}") from exc
        path = os.path.join(out, "flow_trace.csv")
        with open(path, "w", newline="") as fh:
            fh.write(ftrace.to_csv())
        files.append("flow_trace.csv")
        report["flow"] = ftrace.summary()
        verdicts.update(_verdicts(ftrace.certificates, "flow."))
        _failures(ftrace.certificates, "flow.")
    write_json(os.path.join(out, "report.json"), report)
    files.append("report.json")
    _manifest(out, cfg.hash, verdicts, files + ["manifest.json"], seed)
    return _exit_for(verdicts)


def _space_from_args(args):
    if args.space == "tree":
        if not args.tree:
            raise ValidationError("--space tree needs --tree FILE")
        return space_from_json({"kind": "tree", "file": args.tree})
    return space_from_json({"kind": args.space, "dimension": args.dimension})


def cmd_mean(args) -> int:
    space = _space_from_args(args)
    pts, weights = load_points(space, args.points)
    m = len(pts)
    weights = weights or [1.0 / m] * m
    if args.p == 2:
        # SquaredDistance(w) is (w/2) d^2, so weight 2 w_i gives w_i d^2
        terms = [(1.0, SquaredDistance(space, a, weight=2.0 * w)) for a, w in zip(pts, weights)]
    else:
        terms = [(1.0, Distance(space, a, weight=w)) for a, w in zip(pts, weights)]
    f = WeightedSum(space, terms)
    sched = StepSchedule.harmonic(args.lam) if args.harmonic else StepSchedule.constant(args.lam)
    stop = StopRule(args.max_iterations, args.step_tol)
    opts = ResolventOptions(strategy=args.strategy)
    try:
        trace = run_ppa(f, pts[0], sched, stop, opts)
    except ProxError as exc:
        raise type(exc)(f"ppa: {exc}") from exc
    out = args.out or "out"
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "trace.csv"), "w", newline="") as fh:
        fh.write(trace.to_csv())
    result = {"p": args.p, "point": space.payload_to_json(trace.iterates[-1]),
              "value": trace.values[-1], "iterations": trace.n_steps,
              "stop_reason": trace.stop_reason, "space": space.descriptor()}
    write_json(os.path.join(out, "mean.json"), result)
    verdicts = _verdicts(trace.certificates, "ppa.")
    _failures(trace.certificates, "ppa.")
    raw = {"command": "mean", "points": load_json(args.points), "space": space.descriptor(),
           "p": args.p, "schedule": sched.to_json(), "stop": stop.to_json(),
           "resolvent": opts.to_json()}
    _manifest(out, config_hash(raw), verdicts, ["trace.csv", "mean.json", "manifest.json"],
              args.seed)
    print(f"{'mean' if args.p == 2 else 'median'}: {result['point']}")
    return _exit_for(verdicts)


def cmd_verify(args) -> int:
    if args.budget < 1:
        raise ValidationError("--budget must be >= 1")
    space = _space_from_args(args)
    extra = []
    if args.points:
        extra, _ = load_points(space, args.points)
    (rng,) = _rngs(args.seed, 1)
    reports = run_suites(space, args.budget, rng, extra)
    verdicts = {r.name: r.status for r in reports}
    for r in reports:
        line = f"{r.name}: {r.status} (worst {r.worst_residual:.3e}"
        line += f" at sample {r.worst_index})" if r.worst_index is not None else ")"
        print(line)
    out = args.out or "out"
    os.makedirs(out, exist_ok=True)
    write_json(os.path.join(out, "verify_report.json"),
               {"space": space.descriptor(), "budget": args.budget, "seed": args.seed,
                "reports": [r.to_json() for r in reports]})
    raw = {"command": "verify", "space": space.descriptor(), "budget": args.budget}
    _manifest(out, config_hash(raw), verdicts, ["verify_report.json", "manifest.json"], args.seed)
    return _exit_for(verdicts)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="proxcat", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"proxcat {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a JSON experiment config")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.add_argument("--seed", type=int)
    r.set_defaults(func=cmd_run)

    def space_args(q):
        q.add_argument("--space", required=True, choices=["euclidean", "hyperbolic", "spd", "tree"])
        q.add_argument("--dimension", type=int, default=2)
        q.add_argument("--tree", help="tree description file (JSON)")
        q.add_argument("--out")
        q.add_argument("--seed", type=int, default=0)

    m = sub.add_parser("mean", help="Fréchet mean or geometric median of points")
    space_args(m)
    m.add_argument("--points", required=True)
    m.add_argument("--p", type=int, choices=[1, 2], default=2)
    m.add_argument("--lambda", dest="lam", type=float, default=1.0)
    m.add_argument("--harmonic", action="store_true", help="use lambda_n = lambda / n")
    m.add_argument("--max-iterations", type=int, default=1000)
    m.add_argument("--step-tol", type=float, default=1e-12)
    m.add_argument("--strategy", default="auto",
                   choices=["auto", "analytic", "inner_split", "grid"])
    m.set_defaults(func=cmd_mean)

    v = sub.add_parser("verify", help="sampled invariant suites")
    space_args(v)
    v.add_argument("--budget", type=int, default=1000)
    v.add_argument("--points", help="extra points to include in the samples")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ProxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
