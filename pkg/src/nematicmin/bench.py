"""Benchmark driver: run configurations, parameter sweeps, table layouts and
report serialization (CSV and JSON)."""
import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .linear import LinearSolverError, MGConfig
from .mesh import mesh_hierarchy, refine
from .nonlinear import NewtonConfig, initial_state, nested_iteration, newton_solve, prolong_state
from .problems import get_problem, l2_error

CSV_COLUMNS = ("method", "zeta", "energy", "l2_error", "min_dev", "max_dev", "wu", "time_s", "converged")

# problem-specific default for the out-of-plane perturbation of the initial guess
DEFAULT_PERTURB = {"tilt-twist": 1e-2}


@dataclass
class RunConfig:
    problem: str = "twist"
    method: str = "lagrangian"
    stepping: str = "damped"
    zeta: Optional[float] = None
    levels: int = 5
    coarse_n: int = 8
    solver: str = "direct"
    gamma_b: float = 1.2
    tol: float = 1e-4
    perturb: Optional[float] = None
    nested: bool = True

    def newton_config(self):
        return NewtonConfig(method=self.method, stepping=self.stepping, zeta=self.zeta,
                            tolerance=self.tol, solver=self.solver,
                            mg=MGConfig(gamma_b=self.gamma_b))

    @property
    def label(self):
        parts = [self.method, self.stepping]
        if not self.nested:
            parts.append("no-ni")
        if self.solver != "direct":
            parts.append(self.solver)
        return ":".join(parts)

    def effective_perturb(self):
        if self.perturb is not None:
            return self.perturb
        return DEFAULT_PERTURB.get(self.problem, 0.0)


@dataclass
class ReportRow:
    """One line of a results table. Divergent rows carry ``None`` in every
    numeric result field except the cost."""
    method: str
    zeta: Optional[float]
    energy: Optional[float]
    l2_error: Optional[float]
    min_dev: Optional[float]
    max_dev: Optional[float]
    wu: Optional[float]
    time_s: float
    converged: bool
    problem: str = ""
    functional: Optional[float] = None
    iterations: list = field(default_factory=list)
    mg_cycles: list = field(default_factory=list)


def _finite(x):
    return None if x is None or not np.isfinite(x) else float(x)


def row_from_report(report, cfg, problem):
    ok = report.converged
    l2 = None
    if ok and problem.analytic is not None:
        l2 = l2_error(report.state.n, problem.analytic, report.state.space)
    cycles = [c for lv in report.levels for c in lv.mg_cycles]
    return ReportRow(
        method=cfg.label, zeta=cfg.zeta,
        energy=_finite(report.energy) if ok else None,
        l2_error=_finite(l2),
        min_dev=_finite(report.min_dev) if ok else None,
        max_dev=_finite(report.max_dev) if ok else None,
        wu=_finite(report.wu), time_s=float(report.time_s), converged=bool(ok),
        problem=problem.name,
        functional=_finite(report.functional) if ok else None,
        iterations=[int(i) for i in report.iterations],
        mg_cycles=[int(c) for c in cycles],
    )


def run(cfg):
    """Execute one configuration; returns ``(ReportRow, SolveReport or None)``.

    Solver breakdowns are turned into a non-converged row instead of raising.
    """
    problem = get_problem(cfg.problem)
    t0 = time.perf_counter()
    try:
        report = nested_iteration(problem, cfg.levels, cfg.newton_config(), coarse_n=cfg.coarse_n,
                                  nested=cfg.nested, perturb=cfg.effective_perturb())
    except LinearSolverError:
        row = ReportRow(cfg.label, cfg.zeta, None, None, None, None, None,
                        time.perf_counter() - t0, False, problem.name)
        return row, None
    return row_from_report(report, cfg, problem), report


def sweep_zeta(cfg, values):
    """One row per penalty weight; a failing row does not stop the sweep."""
    rows = []
    for z in values:
        c = RunConfig(**{**asdict(cfg), "zeta": float(z)})
        rows.append(run(c)[0])
    return rows


@dataclass
class GammaRow:
    gamma_b: float
    avg_cycles: Optional[float]
    newton_steps: int
    converged: bool


def sweep_gamma(values, problem="flexo", levels=4, coarse_n=8, tol=1e-6, newton_tol=1e-4):
    """Average multigrid cycles per Newton step on the finest mesh for each
    ``gamma_b``.

    The coarser levels are solved once by nested iteration with the direct
    solver; the interpolated state is then driven to convergence on the
    finest mesh with the multigrid solver for every value in the sweep.
    """
    prob = get_problem(problem)
    values = list(values)
    if not values:
        return []
    base = NewtonConfig(tolerance=newton_tol)
    if levels > 1:
        coarse = nested_iteration(prob, levels - 1, base, coarse_n=coarse_n)
        start = prolong_state(prob, coarse.state, refine(coarse.state.mesh), base)
        level = levels - 1
    else:
        start = initial_state(prob, mesh_hierarchy(coarse_n, 1, prob.periodic_x)[0], base)
        level = 0
    meshes = mesh_hierarchy(coarse_n, levels, prob.periodic_x)
    rows = []
    for g in values:
        cfg = NewtonConfig(tolerance=newton_tol, solver="mg", mg=MGConfig(gamma_b=float(g), tolerance=tol))
        try:
            _, rep = newton_solve(prob, start, cfg, level, meshes)
            cyc = rep.mg_cycles
            rows.append(GammaRow(float(g), float(np.mean(cyc)) if cyc else None, rep.iterations,
                                 rep.converged))
        except LinearSolverError:
            rows.append(GammaRow(float(g), None, 0, False))
    return rows


# ---------------------------------------------------------------------------
# serialization


def _fmt(v):
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def rows_to_csv(rows, columns=CSV_COLUMNS):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        d = asdict(r)
        w.writerow([_fmt(d[c]) for c in columns])
    return buf.getvalue()


def _parse_cell(text, column):
    if text == "-":
        return None
    if column == "method":
        return text
    if column == "converged":
        return text == "true"
    if column in ("newton_steps",):
        return int(text)
    return float(text)


def rows_from_csv(text):
    """Parse CSV produced by :func:`rows_to_csv` into dictionaries."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    return [{c: _parse_cell(v, c) for c, v in zip(header, line)} for line in reader]


def round_row(row):
    """Dictionary of the CSV columns of ``row`` at CSV precision."""
    d = asdict(row)
    return {c: _parse_cell(_fmt(d[c]), c) for c in CSV_COLUMNS}


def rows_to_json(rows, meta=None):
    return json.dumps({"meta": meta or {}, "rows": [asdict(r) for r in rows]}, indent=2)


def rows_from_json(text):
    data = json.loads(text)
    return [ReportRow(**r) for r in data["rows"]], data.get("meta", {})


def report_to_dict(report):
    """Per-level details of a solve (iteration counts, residual histories)."""
    return {
        "problem": report.problem,
        "converged": report.converged,
        "diverged": report.diverged,
        "wu": report.wu,
        "energy": None if math.isnan(report.energy) else report.energy,
        "functional": None if math.isnan(report.functional) else report.functional,
        "levels": [
            {"level": lv.level, "nx": lv.nx, "iterations": lv.iterations, "accepted": lv.accepted,
             "rejected": lv.rejected, "nnz": lv.nnz, "mg_cycles": lv.mg_cycles,
             "residuals": [float(r) for r in lv.residuals], "converged": lv.converged,
             "diverged": lv.diverged, "time_s": lv.time_s}
            for lv in report.levels
        ],
    }


# ---------------------------------------------------------------------------
# table layouts


ZETAS = (1e1, 1e2, 1e3, 1e4, 1e5, 1e6)


def table_configs(table, levels=5, coarse_n=8):
    """Run configurations making up one of the benchmark tables.

    3  twist: Lagrangian and penalty weights, damped and simple trust region
    4  twist: renormalized penalty, damped, simple and 2D trust regions
    5  twist: cost with and without nested iteration and trust regions
    6  tilt-twist: same layout as 3
    7  tilt-twist: renormalized penalty and the cost comparison
    8  nano: same layout as 3
    9  nano: renormalized penalty and the cost comparison
    10 flexoelectric problem: direct solver against multigrid
    """
    def cfg(problem, method, stepping, zeta=None, nested=True, solver="direct"):
        return RunConfig(problem=problem, method=method, stepping=stepping, zeta=zeta,
                         levels=levels, coarse_n=coarse_n, nested=nested, solver=solver)

    def comparison(problem):
        out = [cfg(problem, "lagrangian", s) for s in ("damped", "tr_simple")]
        for z in ZETAS:
            out += [cfg(problem, "penalty", s, z) for s in ("damped", "tr_simple")]
        return out

    def renorm(problem):
        return [cfg(problem, "penalty_renorm", s, z) for z in ZETAS for s in ("damped", "tr_simple", "tr_2d")]

    def cost(problem):
        out = []
        for nested in (False, True):
            out += [cfg(problem, "lagrangian", s, None, nested) for s in ("damped", "tr_simple")]
            for method in ("penalty_renorm", "penalty"):
                out += [cfg(problem, method, s, 1e5, nested) for s in ("damped", "tr_simple", "tr_2d")]
        return out

    layouts = {
        3: lambda: comparison("twist"),
        4: lambda: renorm("twist"),
        5: lambda: cost("twist"),
        6: lambda: comparison("tilt-twist"),
        7: lambda: renorm("tilt-twist") + cost("tilt-twist"),
        8: lambda: comparison("nano"),
        9: lambda: renorm("nano") + cost("nano"),
        10: lambda: [cfg("flexo", "lagrangian", s, solver=sv)
                     for sv in ("direct", "mg") for s in ("damped", "tr_simple")],
    }
    if table not in layouts:
        raise ValueError(f"unknown table {table}; choose from {sorted(layouts)}")
    return layouts[table]()


def reproduce(table, levels=5, coarse_n=8):
    return [run(c)[0] for c in table_configs(table, levels, coarse_n)]
