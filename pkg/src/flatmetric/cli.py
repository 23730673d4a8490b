"""Command-line entry point: ``flatmetric {evaluate,flat,surface,toy}``.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

from . import __version__
from .classical import DEFAULT_ALPHA, DEFAULT_RADIUS_TOLERANCE
from .flat import FlatMetricResult, SolverError, flat_metric
from .io import (
    ParseError,
    ensure_parent,
    evaluate_dataset,
    parse_localizations,
    write_report,
    write_surface_csv,
)
from .measures import uniform_normalize
from .synth import SurfaceConfig, surface_sweep, toy_example

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
DEFAULT_LAMBDA = 125.0
TOY_LAMBDA = 0.1


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (math.isfinite(value) and value > 0):
        raise argparse.ArgumentTypeError(f"must be a finite positive number: {text!r}")
    return value


def _count(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text!r}")
    return value


def _workers(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("must be >= 0 (0 = one per CPU)")
    return value


def _grid(text):
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected <radius steps>x<recall steps>, got {text!r}")
    return _count(parts[0]), _count(parts[1])


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(
        prog="flatmetric",
        description="Flat Metric evaluation of point-source reconstructions against ground truth.",
        formatter_class=fmt,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    metric = argparse.ArgumentParser(add_help=False)
    metric.add_argument("--lambda", dest="lam", type=_positive, default=DEFAULT_LAMBDA,
                        help="creation/destruction cost per unit mass [nm]")
    metric.add_argument("--radius-tolerance", type=_positive, default=DEFAULT_RADIUS_TOLERANCE,
                        help="pairing radius for J/precision/recall/RMSE [nm]")
    metric.add_argument("--alpha", type=_positive, default=DEFAULT_ALPHA,
                        help="efficiency trade-off alpha [1/nm]")

    p = sub.add_parser("evaluate", parents=[metric], formatter_class=fmt,
                       help="per-frame and aggregate metrics for a dataset pair")
    p.add_argument("gt", help="ground-truth localization CSV (frame,x,y[,z])")
    p.add_argument("det", help="reconstruction localization CSV")
    p.add_argument("--output", help="write the report here (CSV unless --json or a .json suffix)")
    p.add_argument("--json", action="store_true", help="write the report as JSON")
    p.add_argument("--workers", type=_workers, default=1, help="accepted for symmetry; evaluation is sequential")

    p = sub.add_parser("flat", parents=[metric], formatter_class=fmt,
                       help="flat metric and its move/create/destroy decomposition (frames merged)")
    p.add_argument("gt")
    p.add_argument("det")
    p.add_argument("--json", action="store_true", help="print machine-readable JSON")
    p.add_argument("--output", help="also write the JSON result to this path")

    p = sub.add_parser("surface", formatter_class=fmt,
                       help="synthetic recall x radius surface of mean metrics")
    p.add_argument("--lambda", dest="lam", type=_positive, default=DEFAULT_LAMBDA, help="[nm]")
    p.add_argument("--alpha", type=_positive, default=DEFAULT_ALPHA, help="[1/nm]")
    p.add_argument("--radius-tolerance", type=_positive, default=None,
                   help="pairing radius [nm]; defaults to --radius-max")
    p.add_argument("--grid", type=_grid, default=(51, 51), metavar="RxC",
                   help="radius steps x recall steps")
    p.add_argument("--trials", type=_count, default=50, help="trials per cell")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--n-points", type=_count, default=100, help="ground-truth points per trial")
    p.add_argument("--side", type=_positive, default=6400.0, help="square side [nm]")
    p.add_argument("--radius-max", type=_positive, default=250.0, help="largest perturbation radius [nm]")
    p.add_argument("--workers", type=_workers, default=1, help="worker processes (0 = one per CPU)")
    p.add_argument("--output", help="surface CSV path (stdout when omitted)")

    p = sub.add_parser("toy", formatter_class=fmt,
                       help="small scene in [0,1]x[0,0.5] with its full decomposition, for plotting")
    p.add_argument("--lambda", dest="lam", type=_positive, default=TOY_LAMBDA, help="creation/destruction cost")
    p.add_argument("--n", type=_count, default=15, help="ground-truth points")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--missed", type=int, default=2, help="ground-truth points left undetected")
    p.add_argument("--spurious", type=int, default=2, help="false-positive detections")
    p.add_argument("--radius", type=float, default=0.08, help="localization error radius")
    p.add_argument("--json", action="store_true", help="print JSON to stdout")
    p.add_argument("--output", help="directory for points.csv, events.csv and toy.json")
    return parser


def _fmt(x):
    return "NA" if x is None else f"{x:.3f}"


def cmd_evaluate(args) -> int:
    gt = parse_localizations(args.gt)
    det = parse_localizations(args.det)
    report = evaluate_dataset(gt, det, args.lam, args.radius_tolerance, args.alpha)
    a = report.aggregate
    print(f"flat={_fmt(a.flat_metric)} eff={_fmt(a.efficiency)} J={_fmt(a.jaccard)} "
          f"rmse={_fmt(a.rmse)} rmsmd={_fmt(a.rmsmd)}")
    if args.output:
        ensure_parent(args.output)
        write_report(report, args.output, "json" if args.json else None)
    return EXIT_OK


def result_to_dict(result: FlatMetricResult, mu, nu) -> dict:
    dec = result.decomposition
    events = []
    for mv in dec.moves:
        events.append({"kind": "move", "gt": mv.gt, "det": mv.det, "mass": mv.mass,
                       "distance": mv.distance, "cost": mv.cost})
    for c in dec.creations:
        events.append({"kind": "create", "gt": c.gt, "det": None, "mass": c.mass,
                       "distance": None, "cost": c.cost})
    for d in dec.destructions:
        events.append({"kind": "destroy", "gt": None, "det": d.det, "mass": d.mass,
                       "distance": None, "cost": d.cost})
    return {
        "value": result.value,
        "lambda": result.lam,
        "dual_value": result.dual_value,
        "duality_gap": result.duality_gap,
        "n_gt": mu.n_atoms,
        "n_det": nu.n_atoms,
        "counts": dec.counts(),
        "events": events,
    }


def cmd_flat(args) -> int:
    gt = parse_localizations(args.gt)
    det = parse_localizations(args.det)
    if gt.dim != det.dim:
        raise ValueError(f"dimension mismatch ({gt.dim} != {det.dim})")
    mu, nu = uniform_normalize(gt.merged(), det.merged())
    result = flat_metric(mu, nu, args.lam)
    payload = result_to_dict(result, mu, nu)
    if args.output:
        ensure_parent(args.output)
        with open(args.output, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    if args.json:
        json.dump(payload, sys.stdout, indent=2)
        sys.stdout.write("\n")
        return EXIT_OK
    print(f"flat={result.value:.6f} lambda={result.lam:g} n_gt={mu.n_atoms} n_det={nu.n_atoms}")
    for e in payload["events"]:
        if e["kind"] == "move":
            print(f"move     det={e['det']} -> gt={e['gt']} distance={e['distance']:.6g} "
                  f"mass={e['mass']:.6g} cost={e['cost']:.6g}")
        elif e["kind"] == "create":
            print(f"create   gt={e['gt']} mass={e['mass']:.6g} cost={e['cost']:.6g}")
        else:
            print(f"destroy  det={e['det']} mass={e['mass']:.6g} cost={e['cost']:.6g}")
    return EXIT_OK


def cmd_surface(args) -> int:
    rows, cols = args.grid
    try:
        cfg = SurfaceConfig(
            n_points=args.n_points,
            side=args.side,
            radius_max=args.radius_max,
            radius_steps=rows,
            recall_steps=cols,
            trials=args.trials,
            lam=args.lam,
            alpha=args.alpha,
            r_tol=args.radius_tolerance,
            master_seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    grid = surface_sweep(cfg, workers=args.workers)
    if args.output:
        ensure_parent(args.output)
        write_surface_csv(grid, args.output)
    else:
        write_surface_csv(grid, sys.stdout)
    return EXIT_OK


def cmd_toy(args) -> int:
    if args.missed < 0 or args.spurious < 0 or args.radius < 0:
        raise UsageError("--missed, --spurious and --radius must be >= 0")
    mu, nu, result = toy_example(args.n, args.lam, args.seed, args.missed, args.spurious, args.radius)
    payload = result_to_dict(result, mu, nu)
    payload["seed"] = args.seed
    payload["gt"] = mu.points.tolist()
    payload["det"] = nu.points.tolist()
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "points.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["set", "index", "x", "y"])
            for name, m in (("gt", mu), ("det", nu)):
                for i, (x, y) in enumerate(m.points.tolist()):
                    w.writerow([name, i, repr(x), repr(y)])
        with open(out / "events.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["kind", "gt", "det", "x0", "y0", "x1", "y1", "mass", "cost"])
            for e in payload["events"]:
                # segments run from the detection towards the ground truth
                src = nu.points[e["det"]] if e["det"] is not None else mu.points[e["gt"]]
                dst = mu.points[e["gt"]] if e["gt"] is not None else nu.points[e["det"]]
                w.writerow([
                    e["kind"],
                    "" if e["gt"] is None else e["gt"],
                    "" if e["det"] is None else e["det"],
                    repr(float(src[0])), repr(float(src[1])),
                    repr(float(dst[0])), repr(float(dst[1])),
                    repr(e["mass"]), repr(e["cost"]),
                ])
        with open(out / "toy.json", "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    if args.json:
        json.dump(payload, sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        c = payload["counts"]
        print(f"flat={result.value:.6f} lambda={result.lam:g} moves={c['moves']} "
              f"creations={c['creations']} destructions={c['destructions']}")
    return EXIT_OK


COMMANDS = {"evaluate": cmd_evaluate, "flat": cmd_flat, "surface": cmd_surface, "toy": cmd_toy}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help, --version and argument errors
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"flatmetric: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"flatmetric: error: {exc.filename}: no such file", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, ValueError, SolverError) as exc:
        print(f"flatmetric: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
