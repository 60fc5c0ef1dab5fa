"""Command-line interface: ``python -m nematicmin`` or ``nematicmin``.

Exit status is 0 when the requested work converged, 2 when a solve diverged
or did not reach the tolerance, and 1 on invalid input or other errors.
Sweeps report failures per row and exit with 2 if any row failed.
"""
import argparse
import json
import logging
import sys
from dataclasses import asdict

import numpy as np

from . import bench
from .problems import PROBLEMS

log = logging.getLogger("nematicmin")

METHOD_NAMES = {"lagrangian": "lagrangian", "penalty": "penalty", "penalty-renorm": "penalty_renorm"}
STEPPING_NAMES = {"damped": "damped", "tr-simple": "tr_simple", "tr-2d": "tr_2d"}


def _dashed(text):
    # accept both tr-simple and tr_simple spellings
    return text.replace("_", "-")


def _common(p):
    p.add_argument("--problem", choices=sorted(PROBLEMS), default="twist")
    p.add_argument("--method", type=_dashed, choices=sorted(METHOD_NAMES), default="lagrangian")
    p.add_argument("--stepping", type=_dashed, choices=sorted(STEPPING_NAMES), default="damped")
    p.add_argument("--zeta", type=float, default=None, help="penalty weight (penalty methods)")
    p.add_argument("--levels", type=int, default=5, help="number of meshes in the hierarchy")
    p.add_argument("--coarse-n", type=int, default=8, help="cells per side on the coarsest mesh")
    p.add_argument("--solver", choices=("direct", "mg"), default="direct")
    p.add_argument("--gamma-b", type=float, default=1.2, help="Braess-Sarazin scaling")
    p.add_argument("--tol", type=float, default=1e-4, help="Newton stopping tolerance")
    p.add_argument("--perturb", type=float, default=None,
                   help="out-of-plane perturbation of the initial guess (problem default if omitted)")
    p.add_argument("--no-ni", action="store_true", help="solve only on the finest mesh")
    p.add_argument("--out", default=None, help="write results here (.json or .csv)")


def build_parser():
    parser = argparse.ArgumentParser(prog="nematicmin",
                                     description="Frank-Oseen energy minimization benchmarks")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="solve one configuration")
    _common(p)

    p = sub.add_parser("sweep-zeta", help="repeat a penalty run over several weights")
    _common(p)
    p.add_argument("--values", default="1e1,1e2,1e3,1e4,1e5,1e6", help="comma separated weights")

    p = sub.add_parser("sweep-gamma", help="multigrid cycles against the Braess-Sarazin scaling")
    p.add_argument("--problem", choices=sorted(PROBLEMS), default="flexo")
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--coarse-n", type=int, default=8)
    p.add_argument("--tol", type=float, default=1e-6, help="multigrid residual reduction")
    p.add_argument("--values", default=None, help="comma separated values (default 1.10 to 2.00 by 0.05)")
    p.add_argument("--out", default=None)

    p = sub.add_parser("reproduce", help="run the configurations of one benchmark table")
    p.add_argument("--table", type=int, required=True, choices=range(3, 11), metavar="{3..10}")
    p.add_argument("--levels", type=int, default=5)
    p.add_argument("--coarse-n", type=int, default=8)
    p.add_argument("--out", default=None)
    return parser


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _config(args):
    return bench.RunConfig(problem=args.problem, method=METHOD_NAMES[args.method],
                           stepping=STEPPING_NAMES[args.stepping], zeta=args.zeta,
                           levels=args.levels, coarse_n=args.coarse_n, solver=args.solver,
                           gamma_b=args.gamma_b, tol=args.tol, perturb=args.perturb,
                           nested=not args.no_ni)


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _write_rows(rows, out, meta=None):
    if out and out.endswith(".json"):
        _emit(bench.rows_to_json(rows, meta), out)
    else:
        _emit(bench.rows_to_csv(rows), out)


def cmd_run(args):
    cfg = _config(args)
    row, report = bench.run(cfg)
    if args.out and args.out.endswith(".json"):
        meta = {"config": asdict(cfg), "solve": bench.report_to_dict(report) if report else None}
        _emit(bench.rows_to_json([row], meta), args.out)
    else:
        _write_rows([row], args.out)
    return 0 if row.converged else 2


def cmd_sweep_zeta(args):
    cfg = _config(args)
    rows = bench.sweep_zeta(cfg, _floats(args.values))
    _write_rows(rows, args.out, {"config": asdict(cfg)})
    return 0 if all(r.converged for r in rows) else 2


def cmd_sweep_gamma(args):
    values = _floats(args.values) if args.values else list(np.round(np.arange(1.10, 2.0001, 0.05), 2))
    rows = bench.sweep_gamma(values, args.problem, args.levels, args.coarse_n, args.tol)
    if args.out and args.out.endswith(".json"):
        _emit(json.dumps([asdict(r) for r in rows], indent=2), args.out)
    else:
        _emit(bench.rows_to_csv(rows, ("gamma_b", "avg_cycles", "newton_steps", "converged")), args.out)
    return 0 if all(r.converged for r in rows) else 2


def cmd_reproduce(args):
    rows = []
    for cfg in bench.table_configs(args.table, args.levels, args.coarse_n):
        log.info("running %s %s zeta=%s", cfg.problem, cfg.label, cfg.zeta)
        rows.append(bench.run(cfg)[0])
    _write_rows(rows, args.out, {"table": args.table, "levels": args.levels})
    # divergent rows are expected entries of these tables
    return 0


COMMANDS = {"run": cmd_run, "sweep-zeta": cmd_sweep_zeta, "sweep-gamma": cmd_sweep_gamma,
            "reproduce": cmd_reproduce}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
