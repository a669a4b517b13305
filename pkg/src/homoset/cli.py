"""Command-line interface.

Exit codes: 0 on success, 2 for usage or input errors, 3 when a numerical
routine fails (the message names the error class).
"""

import argparse
import logging
import os
import sys

import numpy as np

from . import io
from .consistency import psi
from .errors import HomosetError, MalformedInput
from .estimation import ESTIMATORS, estimate
from .experiment import (
    SCENARIOS, ExperimentConfig, format_csv, random_scene_trial, run_experiment,
    scarce_plane_trial, scarce_plane_trials, summarize, trial_seeds,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
METHODS = tuple(ESTIMATORS)

log = logging.getLogger("homoset")


class UsageError(Exception):
    pass


def _methods(values):
    out = []
    for v in values or []:
        out.extend(m for m in v.split(",") if m)
    for m in out:
        if m not in METHODS:
            raise UsageError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    return tuple(dict.fromkeys(out)) or METHODS


def _sigmas(text):
    try:
        vals = [float(s) for s in str(text).split(",") if s]
    except ValueError:
        raise UsageError(f"--sigma expects numbers, got {text!r}")
    if not vals or any(v < 0 for v in vals):
        raise UsageError("--sigma must be non-negative")
    return vals


def _emit(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


# subcommands


def cmd_simulate(args):
    sigmas = _sigmas(args.sigma)
    if len(sigmas) != 1:
        raise UsageError("simulate takes a single --sigma")
    sigma = sigmas[0]
    if args.trials < 1 or args.points < 4 or args.planes < 2:
        raise UsageError("need --trials >= 1, --points >= 4 and --planes >= 2")
    single = args.trials == 1 and args.out not in (None, "-") and args.out.endswith(".json")
    if args.out in (None, "-"):
        if args.trials != 1:
            raise UsageError("writing several trials needs --out DIRECTORY")
    elif not single:
        os.makedirs(args.out, exist_ok=True)
    config = ExperimentConfig(trials=args.trials, planes=args.planes, points=args.points,
                              sigma=sigma, seed=args.seed, scenario=args.scenario)
    if args.scenario == "scarce-plane":
        n_trials, make = scarce_plane_trials(config), scarce_plane_trial
    else:
        n_trials, make = args.trials, random_scene_trial
    for trial in range(n_trials):
        train, test = make(config, trial)
        meta = {"scenario": args.scenario, "seed": args.seed, "trial": trial, "sigma": sigma,
                "seeds": trial_seeds(args.seed, trial)}
        text = io.dumps(io.correspondences_to_dict(train, meta))
        if single or args.out in (None, "-"):
            _emit(text, args.out)
        else:
            base = os.path.join(args.out, f"trial_{trial:04d}")
            _emit(text, base + ".json")
            _emit(io.dumps(io.correspondences_to_dict(test, meta)), base + "_test.json")
    return EXIT_OK


def cmd_estimate(args):
    data = io.read_correspondences(args.input)
    for i, n in enumerate(data.counts):
        if n < 4:
            raise MalformedInput(f"{args.input}: plane {i} has {n} pairs; need at least 4")
    test = io.read_correspondences(args.test) if args.test else None
    if test is not None and test.n_planes != data.n_planes:
        raise MalformedInput("test file lists a different number of planes")
    report = estimate(data, args.method, test=test)
    _emit(io.dumps(io.report_to_dict(report)), args.out)
    return EXIT_OK


def cmd_measure(args):
    hs = io.read_homographies(args.input)
    if len(hs) < 2:
        raise MalformedInput(f"{args.input}: need at least two homographies, got {len(hs)}")
    rep = psi(hs)
    top = rep.top(args.top)
    if args.format == "json":
        doc = {
            "version": io.FORMAT_VERSION,
            "psi": rep.psi,
            "n_phi": len(rep.values),
            "max_abs_phi": rep.max_abs_phi,
            "top": [{"a": a, "b": b, "c": c, "d": d, "phi": v} for a, b, c, d, v in top],
            "omegas": [float(w) for w in rep.omegas],
            "degenerate": [bool(f) for f in rep.degenerate_flags],
        }
        _emit(io.dumps(doc), args.out)
    else:
        lines = [f"psi = {rep.psi:.6e}   ({len(rep.values)} minors)"]
        for i, (w, bad) in enumerate(zip(rep.omegas, rep.degenerate_flags), start=1):
            lines.append(f"plane {i}: omega = {w:.6e}" + ("  DEGENERATE" if bad else ""))
        lines.append("   a  b   c   d           phi")
        for a, b, c, d, v in top:
            lines.append(f"  {a:2d} {b:2d} {c:3d} {d:3d}  {v: .6e}")
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_experiment(args):
    methods = _methods(args.method)
    rows, configs = [], []
    for sigma in _sigmas(args.sigma):
        try:
            config = ExperimentConfig(trials=args.trials, planes=args.planes, points=args.points,
                                      sigma=sigma, seed=args.seed, methods=methods,
                                      scenario=args.scenario)
        except ValueError as exc:
            raise UsageError(str(exc))
        block = run_experiment(config)
        for r in block:
            if r["status"] != "ok":
                log.warning("trial %s %s failed: %s", r["trial"], r["method"], r["error"])
        rows.extend(block)
        rows.extend(summarize(block, methods))
        configs.append(config)
    _emit(format_csv(rows, configs[0] if len(configs) == 1 else None), args.out)
    return EXIT_OK


def cmd_convert(args):
    data = io.correspondences_from_csv(args.input)
    _emit(io.dumps(io.correspondences_to_dict(data)), args.out)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(
        prog="homoset", description="Consistent estimation of several homographies."
    )
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="write synthetic correspondence files")
    s.add_argument("--scenario", choices=SCENARIOS, default="random-scene")
    s.add_argument("--trials", type=int, default=1)
    s.add_argument("--planes", type=int, default=4)
    s.add_argument("--points", type=int, default=50)
    s.add_argument("--sigma", default="1.0")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="a .json file for one trial, otherwise a directory")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="estimate homographies from a correspondence file")
    e.add_argument("input")
    e.add_argument("--method", choices=METHODS, default="ba-explicit")
    e.add_argument("--test", help="correspondence file used for test RMS")
    e.add_argument("--out")
    e.set_defaults(func=cmd_estimate)

    m = sub.add_parser("measure", help="report the incompatibility of a homography set")
    m.add_argument("input")
    m.add_argument("--top", type=int, default=5)
    m.add_argument("--format", choices=("json", "table"), default="json")
    m.add_argument("--out")
    m.set_defaults(func=cmd_measure)

    x = sub.add_parser("experiment", help="compare estimators over many trials (CSV)")
    x.add_argument("--scenario", choices=SCENARIOS, default="random-scene")
    x.add_argument("--trials", type=int, default=1000)
    x.add_argument("--planes", type=int, default=4)
    x.add_argument("--points", type=int, default=50)
    x.add_argument("--sigma", default="1.0", help="one value or a comma-separated list")
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--method", action="append",
                   help="estimator (repeatable or comma-separated); default: all")
    x.add_argument("--out")
    x.set_defaults(func=cmd_experiment)

    c = sub.add_parser("convert", help="convert plane,x1,y1,x2,y2 CSV to JSON")
    c.add_argument("input")
    c.add_argument("--out")
    c.set_defaults(func=cmd_convert)
    return p


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, MalformedInput) as exc:
        parser.print_usage(sys.stderr)
        print(f"homoset: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"homoset: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        # raised by configuration checks such as HOMOSET_THREADS
        print(f"homoset: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (HomosetError, np.linalg.LinAlgError) as exc:
        print(f"homoset: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
