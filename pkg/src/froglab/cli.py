"""Command-line interface tying the modules into reproducible experiments.

Every command writes a self-describing document. JSON output has the shape
{"header": {...}, "body": {...}}: the header carries the timestamp, runtime
and tool version; the body is byte-reproducible given the same arguments and
seed (floats are printed with 17 significant digits). CSV columns use '.' as
the decimal separator regardless of locale.

Exit status: 0 on success / verification pass, 1 on verification failure,
2 on usage errors.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from fractions import Fraction

import numpy as np

from . import __version__
from .errors import FroglabError
from .fixedpoint import (
    VisitOperator,
    check_operator_domination,
    check_vanishing,
)
from .frogsim import SimConfig, estimate_pgf, run_batch
from .gridfn import GridFunction
from .params import ModelParams, critical_drift
from .polynomials import build, to_json_dict, to_text
from .verify import SUITES, run_suite
from .walks import sample_patterns

SCHEMA_VERSION = 1
SEED_ENV_VAR = "FROGLAB_SEED"


def _format_float(x: float) -> str:
    if x != x or x in (float("inf"), float("-inf")):
        return "null"
    return format(x, ".17g")


def format_json(obj, indent: int = 0) -> str:
    """Deterministic JSON with 17-significant-digit floats and sorted keys."""
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(
            f'{pad}  "{k}": {format_json(obj[k], indent + 1)}' for k in sorted(obj, key=str)
        )
        return "{\n" + items + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = ", ".join(format_json(v, indent + 1) for v in obj)
        return "[" + items + "]"
    if isinstance(obj, bool) or obj is None:
        return {True: "true", False: "false", None: "null"}[obj]
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    return '"' + str(obj).replace("\\", "\\\\").replace('"', '\\"') + '"'


def emit_json(body: dict, run_config: dict, out: str | None, runtime: float) -> None:
    doc = {
        "header": {
            "schema_version": SCHEMA_VERSION,
            "tool": f"froglab {__version__}",
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "runtime_seconds": runtime,
            "run_config": run_config,
        },
        "body": body,
    }
    text = format_json(doc) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_p(text: str):
    return Fraction(text) if "/" in text else float(text)


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV_VAR)
    return int(env) if env else 0


def _run_config(args) -> dict:
    return {k: (str(v) if isinstance(v, Fraction) else v) for k, v in vars(args).items() if k != "func"}


def _add_common(sub, *, seed=True, out=True):
    if seed:
        sub.add_argument("--seed", type=int, default=None,
                         help=f"master seed (default: ${SEED_ENV_VAR} or 0)")
    if out:
        sub.add_argument("--out", default=None, help="output file (default: stdout)")
    sub.add_argument("--threads", type=int, default=0,
                     help="worker thread cap, 0 = auto (engines are serial per run)")


def cmd_params(args) -> int:
    t0 = time.perf_counter()
    params = ModelParams(args.d, args.p, force=args.force)
    emit_json(params.to_dict(), _run_config(args), args.out, time.perf_counter() - t0)
    return 0


def cmd_poly(args) -> int:
    t0 = time.perf_counter()
    poly = build(args.family, args.k)
    name = f"{args.family}{args.k}"
    if args.format == "text":
        line = to_text(poly, name) + "\n"
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(line)
        else:
            sys.stdout.write(line)
    else:
        emit_json(to_json_dict(poly, args.family, args.k), _run_config(args), args.out,
                  time.perf_counter() - t0)
    return 0


def cmd_iterate(args) -> int:
    t0 = time.perf_counter()
    params = ModelParams(args.d, args.p)
    op = VisitOperator(params)
    h0 = GridFunction.constant(1.0 if args.h0 == "one" else 0.0, args.grid_size)
    trace = op.iterate(h0, args.n)
    lines = ["n,x,value"]
    for n, fn in enumerate(trace.functions):
        for x, v in zip(fn.grid, fn.values):
            lines.append(f"{n},{_format_float(float(x))},{_format_float(float(v))}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    sys.stderr.write(f"iterated {args.n} times in {time.perf_counter() - t0:.2f}s; "
                     f"final sup {trace.sup_values[-1]:.6g}\n")
    return 0


def cmd_check(args) -> int:
    t0 = time.perf_counter()
    if args.name == "vanishing":
        rep = check_vanishing(n_max=args.n_max, tol=args.tol, grid_size=args.grid_size)
        body = {
            "name": "vanishing",
            "pass": bool(rep["attained"] and rep["monotone_ok"]),
            "max_violation": rep["max_monotone_violation"],
            "details": {k: v for k, v in rep.items() if k != "sup_values"},
        }
    else:
        seed = _resolve_seed(args)
        report = run_suite("inequality", d=args.d, reps=args.reps, depth=args.depth, seed=seed)
        body = {
            "name": "ad-le-a2",
            "pass": report.passed,
            "max_violation": report.statistics["max_violation"],
            "details": report.body(),
        }
    emit_json(body, _run_config(args), args.out, time.perf_counter() - t0)
    return 0 if body["pass"] else 1


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    seed = _resolve_seed(args)
    cfg = SimConfig(ModelParams(args.d, args.p), args.model, depth=args.depth,
                    reps=args.reps, seed=seed)
    batch = run_batch(cfg)
    xs = [float(x) for x in args.x_grid.split(",")] if args.x_grid else [0.0, 0.25, 0.5, 0.75]
    estimates = estimate_pgf(cfg, xs, batch=batch)
    d = args.d
    body = {
        "config": {"model": args.model, "d": args.d, "p": float(args.p),
                   "depth": args.depth, "reps": args.reps, "seed": seed},
        "per_x": [
            {"x": x, "estimate": e.mean, "ci_halfwidth": e.halfwidth}
            for x, e in zip(xs, estimates)
        ],
        "event_rates": {
            "mean_root_visits": float(batch.root_visits.mean()),
            "p_no_visit": float((batch.root_visits == 0).mean()),
            "d1_rate": float(batch.d1.mean()) if args.model != "fm" else None,
            "mean_activated": (
                float(batch.activated_count.mean()) if args.model != "fm" else None
            ),
        },
        "flags": {
            "horizon_exhausted": (
                int(batch.horizon_exhausted.sum()) if batch.horizon_exhausted is not None else 0
            ),
            "truncation_note": "estimates are upper bounds decreasing in depth",
        },
    }
    emit_json(body, _run_config(args), args.out, time.perf_counter() - t0)
    return 0


def cmd_coupling(args) -> int:
    t0 = time.perf_counter()
    seed = _resolve_seed(args)
    patterns, steps = sample_patterns(args.d, args.p, args.depth, args.reps, seed=seed)
    lines = ["replicate,k1_or_root,steps_used"]
    for i in range(patterns.size):
        tag = "root" if patterns[i] == args.depth else str(int(patterns[i]))
        lines.append(f"{i},{tag},{int(steps[i])}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    sys.stderr.write(f"sampled {args.reps} patterns in {time.perf_counter() - t0:.2f}s\n")
    return 0


def cmd_estimate_pgf(args) -> int:
    return cmd_simulate(args)


def cmd_verify(args) -> int:
    t0 = time.perf_counter()
    seed = _resolve_seed(args)
    names = list(SUITES) if args.suite == "all" else [args.suite]
    reports = []
    for name in names:
        kwargs: dict = {"seed": seed}
        if name == "series":
            kwargs = {}
        elif name == "coupling":
            kwargs.update(d=args.d, p=args.p, reps=args.reps)
        elif name == "binomial":
            kwargs.update(d=args.d, p=args.p, j_size=args.j_size, reps=args.reps, depth=args.depth)
        elif name == "self-consistency":
            kwargs.update(d=args.d, p=args.p, reps=args.reps, depth=args.depth)
        elif name == "rsfm":
            kwargs.update(d=args.d, p=args.p, reps=args.reps, depth=args.depth)
        elif name == "domination":
            kwargs.update(d=args.d, p=args.p, reps=args.reps, depth=args.depth)
        elif name == "self-similarity":
            kwargs.update(d=args.d, p=args.p, reps=args.reps, depth=args.depth)
        elif name == "inequality":
            kwargs.update(d=args.d, reps=args.reps, depth=args.depth)
        reports.append(run_suite(name, **kwargs))
    body = {
        "suites": [r.body() for r in reports],
        "pass": all(r.passed for r in reports),
    }
    emit_json(body, _run_config(args), args.out, time.perf_counter() - t0)
    return 0 if body["pass"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="froglab",
        description="Simulation and numerical verification of frog models on d-ary trees.",
    )
    parser.add_argument("--version", action="version", version=f"froglab {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    sp = subs.add_parser("params", help="print the scalars derived from (d, p)")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--p", type=_parse_p, required=True, help="float or fraction like 1/3")
    sp.add_argument("--force", action="store_true", help="lift the p <= 1/2 cap")
    _add_common(sp, seed=False)
    sp.set_defaults(func=cmd_params)

    sp = subs.add_parser("poly", help="print a recursion-family polynomial")
    sp.add_argument("--family", choices=("P", "Q"), required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--format", choices=("text", "json"), default="text")
    _add_common(sp, seed=False)
    sp.set_defaults(func=cmd_poly)

    sp = subs.add_parser("iterate", help="iterate the visit operator on a grid")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--p", type=_parse_p, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--grid-size", type=int, default=1024)
    sp.add_argument("--h0", choices=("one", "zero"), default="one")
    _add_common(sp, seed=False)
    sp.set_defaults(func=cmd_iterate)

    sp = subs.add_parser("check", help="run a numerical operator check")
    sp.add_argument("--name", choices=("vanishing", "ad-le-a2"), required=True)
    sp.add_argument("--d", type=int, default=3)
    sp.add_argument("--n-max", type=int, default=500)
    sp.add_argument("--tol", type=float, default=0.05)
    sp.add_argument("--grid-size", type=int, default=1024)
    sp.add_argument("--reps", type=int, default=20_000)
    sp.add_argument("--depth", type=int, default=8)
    _add_common(sp)
    sp.set_defaults(func=cmd_check)

    for name, fn in (("simulate", cmd_simulate), ("estimate-pgf", cmd_estimate_pgf)):
        sp = subs.add_parser(name, help="run truncated frog-model replicates")
        sp.add_argument("--model", choices=("fm", "nbfm", "sfm", "rsfm"), required=True)
        sp.add_argument("--d", type=int, required=True)
        sp.add_argument("--p", type=_parse_p, required=True)
        sp.add_argument("--depth", type=int, required=True)
        sp.add_argument("--reps", type=int, required=True)
        sp.add_argument("--x-grid", default=None, help="comma-separated arguments in [0,1)")
        _add_common(sp)
        sp.set_defaults(func=fn)

    sp = subs.add_parser("coupling", help="sample loop-erased walk patterns")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--p", type=_parse_p, required=True)
    sp.add_argument("--depth", type=int, required=True, help="start depth of the walker")
    sp.add_argument("--reps", type=int, required=True)
    _add_common(sp)
    sp.set_defaults(func=cmd_coupling)

    sp = subs.add_parser("verify", help="run verification suites")
    sp.add_argument("--suite", choices=tuple(SUITES) + ("all",), required=True)
    sp.add_argument("--d", type=int, default=3)
    sp.add_argument("--p", type=_parse_p, default=Fraction(1, 3))
    sp.add_argument("--j-size", type=int, default=1)
    sp.add_argument("--reps", type=int, default=50_000)
    sp.add_argument("--depth", type=int, default=10)
    _add_common(sp)
    sp.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FroglabError as exc:
        parser.exit(2, f"froglab: {exc}\n")


if __name__ == "__main__":
    sys.exit(main())
