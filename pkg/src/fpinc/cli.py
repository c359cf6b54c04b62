"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant
violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import warnings
from collections import Counter

from . import harness
from .errors import DataError, InvariantViolation
from .field import PlaneContext
from .harness import GeneratorSpec, generate, run_beck_pipeline, run_incidence_pipeline
from .incidence import count_incidences, load_lines, load_points, save_lines, save_points
from .sumprod import (
    check_partial_sumprod,
    check_rudnev,
    half_bsg,
    load_grid,
    mult_energy,
    partial_set,
    save_grid,
    GridInstance,
)

log = logging.getLogger("fpinc")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _default_seed() -> int:
    raw = os.environ.get("FPINC_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"FPINC_SEED must be an integer, got {raw!r}") from None


def _int_list(text: str) -> list[int]:
    """'4:16' (inclusive range) or '1,2,4'."""
    try:
        if ":" in text:
            lo, hi = text.split(":")
            return list(range(int(lo), int(hi) + 1))
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'lo:hi' or a comma list, got {text!r}") from None


def _add_generator(sp, points=True, lines=True):
    src = sp.add_argument_group("input")
    if points:
        src.add_argument("--points", help="CSV file of x,y rows")
    if lines:
        src.add_argument("--lines", help="CSV file of a,b,c rows (a*x + b*y = c)")
    src.add_argument("--family", choices=harness.FAMILIES, help="generate the instance instead")
    src.add_argument("--n", type=int, default=0, help="points (or |A| for grid/ap/gp)")
    src.add_argument("--m", type=int, help="lines / outliers, family dependent")
    src.add_argument("--start", type=int, help="ap first term")
    src.add_argument("--step", type=int, help="ap common difference")
    src.add_argument("--ratio", type=int, default=2, help="gp common ratio")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fpinc", description="Incidence and partial sum-product experiments over F_p.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--p", type=int, required=True, help="prime modulus")
        sp.add_argument("--seed", type=int, default=None, help="instance seed (default $FPINC_SEED or 0)")
        sp.add_argument("--out", help="output file (default stdout)")
        sp.add_argument("--pretty", action="store_true", help="indented human-readable output")

    sp = sub.add_parser("incidences", help="count incidences and degree profiles")
    common(sp)
    _add_generator(sp)
    sp.add_argument("--method", choices=("bucket", "naive"), default="bucket")

    sp = sub.add_parser("beck", help="run the Beck-type pipeline on a point set")
    common(sp)
    _add_generator(sp, lines=False)

    sp = sub.add_parser("pipeline", help="run the incidence-bound pipeline")
    common(sp)
    _add_generator(sp)
    sp.add_argument("--trace", action="store_true", help="emit one JSON line per stage")

    sp = sub.add_parser("sumprod", help="checks on a grid file")
    sp.add_argument("--grid", required=True, help="JSON file with p, A, B, G")
    sp.add_argument("--check", action="append",
                    choices=("energy", "partial", "halfbsg", "prop41", "all"))
    sp.add_argument("--eps", type=float, default=0.01)
    sp.add_argument("--out")
    sp.add_argument("--pretty", action="store_true")

    sp = sub.add_parser("rudnev", help="energy vs difference-set ratio for sets")
    common(sp)
    sp.add_argument("--set", type=_int_list, help="explicit set, e.g. 1,2,4")
    sp.add_argument("--family", choices=("grid", "ap", "gp"))
    sp.add_argument("--sizes", type=_int_list, help="set sizes, e.g. 4:16")
    sp.add_argument("--start", type=int)
    sp.add_argument("--step", type=int)
    sp.add_argument("--ratio", type=int, default=2)

    sp = sub.add_parser("sweep", help="seeded sweep emitting JSON-lines records")
    common(sp)
    sp.add_argument("--family", choices=harness.FAMILIES, required=True)
    sp.add_argument("--sizes", type=_int_list, required=True)
    sp.add_argument("--seeds", type=int, default=1, help="instances per size")
    sp.add_argument("--check", choices=harness.CHECKS, default="incidence")
    sp.add_argument("--m", type=int)
    sp.add_argument("--ratio", type=int, default=2)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--csv", help="also write the summary CSV here")
    sp.add_argument("--timing", action="store_true", help="record wall time (breaks byte determinism)")

    sp = sub.add_parser("gen", help="write a generated instance to files")
    common(sp)
    _add_generator(sp, points=False, lines=False)
    sp.add_argument("--points-out", required=True)
    sp.add_argument("--lines-out")
    sp.add_argument("--grid-out", help="complete grid A x A, product families only")
    return parser


class _Output:
    def __init__(self, path, pretty):
        self.fh = open(path, "w") if path else sys.stdout
        self.pretty = pretty

    def emit(self, record):
        if self.pretty:
            self.fh.write(json.dumps(record, indent=2, sort_keys=True) + "\n")
        else:
            self.fh.write(json.dumps(record, sort_keys=True) + "\n")

    def close(self):
        if self.fh is not sys.stdout:
            self.fh.close()


def _spec(args) -> GeneratorSpec:
    return GeneratorSpec(args.family, args.p, args.n, args.seed, m=args.m, start=args.start,
                         step=args.step, ratio=args.ratio)


def _load_instance(args, need_lines=True):
    """(points, lines or None, provenance) from exactly one input source."""
    from_files = getattr(args, "points", None) or getattr(args, "lines", None)
    if from_files and args.family:
        raise UsageError("give either --points/--lines or --family, not both")
    if not from_files and not args.family:
        raise UsageError("an input is required: --points/--lines or --family")
    if args.family:
        inst = generate(_spec(args))
        return inst.points, inst.lines, {"family": args.family, **_spec(args).to_json()}
    PlaneContext(args.p)
    if not getattr(args, "points", None):
        raise UsageError("--points is required with file input")
    P = load_points(args.points, args.p)
    L = None
    if getattr(args, "lines", None):
        L = load_lines(args.lines, args.p)
    elif need_lines:
        raise UsageError("--lines is required with file input")
    return P, L, {"points": args.points, "lines": getattr(args, "lines", None), "p": args.p}


def _histogram(counts: dict) -> dict:
    return {str(k): v for k, v in sorted(Counter(counts.values()).items())}


def cmd_incidences(args, out):
    P, L, prov = _load_instance(args)
    if L is None:
        raise UsageError(f"family {args.family!r} defines no line set")
    prof = count_incidences(P, L, method=args.method)
    out.emit({
        "command": "incidences", "input": prov, "method": args.method, "points": len(P),
        "lines": len(L), "I": prof.total, "degree_histogram": _histogram(prof.degree),
        "richness_histogram": _histogram(prof.richness),
    })


def cmd_beck(args, out):
    P, _, prov = _load_instance(args, need_lines=False)
    trace = run_beck_pipeline(P)
    out.emit({
        "command": "beck", "input": prov, "points": len(P), "maxcol": trace.stats["maxcol"],
        "lines": trace.stats["L_of_P"], "exponent": trace.stats["exponent"], "case": trace.case,
        "trace": trace.to_json(),
    })


def cmd_pipeline(args, out):
    P, L, prov = _load_instance(args)
    if L is None:
        L = harness.default_lines(P)
    trace = run_incidence_pipeline(P, L)
    doc = trace.to_json()
    if args.trace:
        for stage in doc["stages"]:
            out.emit({"command": "pipeline", "record": "stage", **stage})
    out.emit({"command": "pipeline", "record": "summary", "input": prov, "points": len(P),
              "lines": len(L), "case": trace.case, "trace": doc})


def cmd_sumprod(args, out):
    g = load_grid(args.grid)
    checks = set(args.check or ["all"])
    if "all" in checks:
        checks = {"energy", "partial", "halfbsg", "prop41"}
    rec = {"command": "sumprod", "grid": args.grid, "p": g.p, "eps": args.eps,
           "A": len(g.A), "B": len(g.B), "G": len(g.G)}
    if "partial" in checks:
        rec["partial"] = {}
        for op in "+-*/":
            try:
                rec["partial"][op] = sorted(partial_set(g, op))
            except DataError as exc:
                rec["partial"][op] = {"error": str(exc)}
    if "energy" in checks:
        rep = mult_energy(g.A, g.p)
        rec["energy"] = {"A": rep.energy, "histogram": {str(k): v for k, v in rep.histogram.items()}}
    if "prop41" in checks:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rep = check_partial_sumprod(g)
        rec["prop41"] = {
            **harness.ratio_entry(rep.ratio, "partial sum-product |G|^55 bound"),
            "exact": str(rep.ratio), "G": rep.G, "A": rep.A, "B": rep.B, "diff": rep.diff,
            "ratio_size": rep.ratio_size, "skipped_edges": rep.skipped_edges, "warning": rep.warning,
        }
    if "halfbsg" in checks:
        res = half_bsg(g, args.eps)
        rec["halfbsg"] = {
            "A2": list(res.members), "diff_size": res.diff_size,
            "diff_report": float(res.diff_report), "energy": res.energy.energy,
            "energy_report": float(res.energy_report), "cs_bound": float(res.cs_bound),
            "A1": len(res.refined.members), "threshold": res.refined.threshold,
        }
    out.emit(rec)


def cmd_rudnev(args, out):
    if (args.set is None) == (args.family is None):
        raise UsageError("give exactly one of --set or --family")
    if args.set is not None:
        sets = [("set", tuple(args.set))]
    else:
        if not args.sizes:
            raise UsageError("--family needs --sizes")
        sets = []
        for n in args.sizes:
            spec = GeneratorSpec(args.family, args.p, n, args.seed, start=args.start, step=args.step,
                                 ratio=args.ratio)
            sets.append((args.family, generate(spec).A))
    for label, A in sets:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rep = check_rudnev(A, args.p)
        out.emit({
            "command": "rudnev", "p": args.p, "source": label, "size": rep.size, "energy": rep.energy,
            "diff": rep.diff_size, **harness.ratio_entry(rep.ratio, "E(A)^4 vs |A-A|^7 |A|^4"),
            "exact": str(rep.ratio), "warning": rep.warning,
        })


def cmd_sweep(args, out):
    params = {"ratio": args.ratio}
    if args.m is not None:
        params["m"] = args.m
    records = harness.sweep(args.family, args.sizes, args.p, seeds=args.seeds, check=args.check,
                            master_seed=args.seed, jobs=args.jobs, timing=args.timing, **params)
    for rec in records:
        out.emit(rec)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=harness.SUMMARY_COLUMNS)
            w.writeheader()
            for rec in records:
                w.writerow(harness.summary_row(rec))


def cmd_gen(args, out):
    if not args.family:
        raise UsageError("gen needs --family")
    inst = generate(_spec(args))
    save_points(args.points_out, inst.points)
    rec = {"command": "gen", **_spec(args).to_json(), "points": len(inst.points),
           "points_out": args.points_out}
    if args.lines_out:
        if inst.lines is None:
            raise UsageError(f"family {args.family!r} defines no line set")
        save_lines(args.lines_out, inst.lines)
        rec.update(lines=len(inst.lines), lines_out=args.lines_out)
    if args.grid_out:
        if inst.A is None:
            raise UsageError(f"family {args.family!r} has no base set for a grid")
        save_grid(args.grid_out, GridInstance.complete(args.p, inst.A))
        rec["grid_out"] = args.grid_out
    out.emit(rec)


COMMANDS = {
    "incidences": cmd_incidences, "beck": cmd_beck, "pipeline": cmd_pipeline, "sumprod": cmd_sumprod,
    "rudnev": cmd_rudnev, "sweep": cmd_sweep, "gen": cmd_gen,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(message)s")
        if hasattr(args, "seed") and args.seed is None:
            args.seed = _default_seed()
        out = _Output(args.out, args.pretty)
        try:
            COMMANDS[args.command](args, out)
        finally:
            out.close()
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvariantViolation, AssertionError) as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
