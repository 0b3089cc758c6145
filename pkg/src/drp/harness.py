"""Generate, preprocess, formulate, solve, validate and report.

The pipeline used by the command line and by the benchmark: one call per
instance produces the generated graph, the MILP, the solver result and an
independent validation report, with preprocessing and solver time kept apart.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import catalog
from .energy import EnergyModel, default_phase_model
from .formulation import FormulationOptions, MilpModel, build_model
from .graphgen import BuildStats, GeneratedGraph, arc_bound, build_generated_graph, vertex_bound
from .instance import (
    GeneratorConfig,
    Instance,
    LegTimes,
    SlowdownLegTimes,
    generate_instance,
    travel_tables,
)
from .solver import MilpParams, MilpResult, Solution, ValidationReport, solve_milp, validate_solution

CSV_COLUMNS = ("name", "n", "upmnr", "V", "A", "boundV", "boundA", "ratioV", "ratioA",
               "prep_s", "solve_s", "UP", "LB", "gap_pct", "status")


# ---------------------------------------------------------------------------
# single-instance pipeline


@dataclass
class PipelineResult:
    instance: Instance
    graph: GeneratedGraph
    model: Optional[MilpModel]
    result: Optional[MilpResult]
    solution: Optional[Solution]
    report: Optional[ValidationReport]
    prep_seconds: float
    solve_seconds: float

    @property
    def status(self) -> str:
        if not self.graph.feasible:
            return "infeasible"
        if self.result is None:
            return "error"
        if self.report is not None and not self.report.ok:
            return "invalid"
        return self.result.status


def generator_config(n: int, depot: str = "corner", energy: str = "linear",
                     objective: str = "RE") -> GeneratorConfig:
    """Random-instance settings shared by the CLI and the benchmark.

    The phase model has no closed form to store in the config; callers pass
    :func:`~drp.energy.default_phase_model` alongside instead.
    """
    base = catalog.oracle_config(n, "linear" if energy == "phase" else energy, objective)
    if energy == "phase":
        base = replace(base, energy=None, battery=math.inf)
    return replace(base, depot_style=depot)


def energy_model_for(energy: str) -> Optional[EnergyModel]:
    return default_phase_model() if energy == "phase" else None


def leg_times_for(instance: Instance, slowdown: float = 0.0) -> LegTimes:
    tables = travel_tables(instance)
    return SlowdownLegTimes(tables, slowdown) if slowdown else LegTimes(tables)


def run_pipeline(instance: Instance, options: Optional[FormulationOptions] = None,
                 params: Optional[MilpParams] = None, energy_model: Optional[EnergyModel] = None,
                 leg_times: Optional[LegTimes] = None, validate: bool = True) -> PipelineResult:
    """Preprocess, build and solve one instance; the incumbent is validated independently."""
    options = options or FormulationOptions()
    tables = travel_tables(instance)
    t0 = time.perf_counter()
    graph = build_generated_graph(instance, tables, energy_model, leg_times)
    if not graph.feasible:
        return PipelineResult(instance, graph, None, None, None, None, time.perf_counter() - t0, 0.0)
    model = build_model(graph, instance, options, tables, energy_model)
    prep = time.perf_counter() - t0
    t1 = time.perf_counter()
    res, sol = solve_milp(model, graph, instance, params, tables=tables, energy_model=energy_model,
                          leg_times=leg_times, validate=validate)
    solve = time.perf_counter() - t1
    report = None
    if sol is not None:
        report = validate_solution(sol, instance, tables, energy_model, hover=options.hover,
                                   leg_times=leg_times)
    return PipelineResult(instance, graph, model, res, sol, report, prep, solve)


# ---------------------------------------------------------------------------
# benchmark rows


def _opt_float(s: str) -> Optional[float]:
    return None if s == "" else float(s)


def _opt_int(s: str) -> Optional[int]:
    return None if s == "" else int(s)


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class BenchRow:
    name: str
    n: int
    upmnr: Optional[int]
    V: int
    A: int
    boundV: Optional[int]
    boundA: Optional[int]
    ratioV: Optional[float]
    ratioA: Optional[float]
    prep_s: float
    solve_s: float
    UP: Optional[float]
    LB: Optional[float]
    gap_pct: Optional[float]
    status: str

    def cells(self) -> List[str]:
        return [_cell(getattr(self, c)) for c in CSV_COLUMNS]

    @classmethod
    def from_cells(cls, cells: Sequence[str]) -> "BenchRow":
        if len(cells) != len(CSV_COLUMNS):
            raise ValueError(f"expected {len(CSV_COLUMNS)} cells, got {len(cells)}")
        v = dict(zip(CSV_COLUMNS, cells))
        return cls(
            v["name"], int(v["n"]), _opt_int(v["upmnr"]), int(v["V"]), int(v["A"]),
            _opt_int(v["boundV"]), _opt_int(v["boundA"]), _opt_float(v["ratioV"]),
            _opt_float(v["ratioA"]), float(v["prep_s"]), float(v["solve_s"]),
            _opt_float(v["UP"]), _opt_float(v["LB"]), _opt_float(v["gap_pct"]), v["status"],
        )


def gap_percent(up: Optional[float], lb: Optional[float]) -> Optional[float]:
    if up is None or lb is None or not (math.isfinite(up) and math.isfinite(lb)):
        return None
    if up > 0:
        return 100.0 * (up - lb) / up
    return 100.0 * (up - lb) / max(1e-9, abs(up))


def row_from(name: str, run: PipelineResult) -> BenchRow:
    st: BuildStats = run.graph.stats
    res = run.result
    up = res.objective if res is not None and res.has_solution else None
    lb = res.bound if res is not None and math.isfinite(res.bound) else None
    return BenchRow(name, st.n, st.upmnr, st.n_vertices, st.n_arcs, st.bound_v, st.bound_a,
                    st.ratio_v, st.ratio_a, run.prep_seconds, run.solve_seconds, up, lb,
                    gap_percent(up, lb), run.status)


def rows_to_csv(rows: Sequence[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def rows_from_csv(text: str) -> List[BenchRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != CSV_COLUMNS:
        raise ValueError(f"bad CSV header {header!r}")
    return [BenchRow.from_cells(r) for r in reader if r]


def _fmt(v, width: int, digits: int = 3) -> str:
    if v is None:
        s = "-"
    elif isinstance(v, float):
        s = f"{v:.{digits}f}"
    else:
        s = str(v)
    return s.rjust(width)


def format_table(rows: Sequence[BenchRow]) -> str:
    widths = [max(len(c), 8) for c in CSV_COLUMNS]
    widths[0] = max([len("name")] + [len(r.name) for r in rows])
    widths[-1] = max([len("status")] + [len(r.status) for r in rows])
    lines = [" ".join(c.rjust(w) for c, w in zip(CSV_COLUMNS, widths))]
    for r in rows:
        vals = [getattr(r, c) for c in CSV_COLUMNS]
        lines.append(" ".join(_fmt(v, w) for v, w in zip(vals, widths)))
    return "\n".join(lines)


def summarize(rows: Sequence[BenchRow]) -> str:
    """Mean times and quartiles of the size ratios."""
    if not rows:
        return "SUMMARY rows=0"
    out = [f"SUMMARY rows={len(rows)} mean_prep_s={np.mean([r.prep_s for r in rows]):.4f} "
           f"mean_solve_s={np.mean([r.solve_s for r in rows]):.4f}"]
    for key in ("ratioV", "ratioA"):
        vals = [getattr(r, key) for r in rows if getattr(r, key) is not None]
        if vals:
            q1, q2, q3 = np.percentile(vals, [25, 50, 75])
            out.append(f"{key} quartiles {q1:.3f} {q2:.3f} {q3:.3f} (percent of bound)")
    return "\n".join(out)


# ---------------------------------------------------------------------------
# benchmark driver


@dataclass
class BenchConfig:
    sizes: Sequence[int] = ()
    seeds: Sequence[int] = (0,)
    settings: Sequence[str] = ("R", "E", "RE")
    named: Sequence[str] = ()
    energy: str = "linear"
    depot: str = "corner"
    options: FormulationOptions = field(default_factory=FormulationOptions)
    params: MilpParams = field(default_factory=MilpParams)
    slowdown: float = 0.0
    workers: int = 1


@dataclass
class BenchTable:
    rows: List[BenchRow]

    def csv(self) -> str:
        return rows_to_csv(self.rows)

    def text(self) -> str:
        return format_table(self.rows) + "\n" + summarize(self.rows)


def _jobs(config: BenchConfig) -> List[Tuple[str, Instance, Optional[EnergyModel]]]:
    jobs = []
    for name in config.named:
        if name not in catalog.NAMED:
            raise ValueError(f"unknown named instance {name!r}")
        for s in config.settings:
            jobs.append((f"{name}-{s}", catalog.NAMED[name](objective=s), None))
    model = energy_model_for(config.energy)
    for n in config.sizes:
        for seed in config.seeds:
            for s in config.settings:
                inst = generate_instance(generator_config(n, config.depot, config.energy, s), seed)
                jobs.append((f"{config.energy}-{config.depot}-n{n}-s{seed}-{s}", inst, model))
    return jobs


def _run_job(config: BenchConfig, job) -> BenchRow:
    name, inst, model = job
    try:
        lt = leg_times_for(inst, config.slowdown)
        run = run_pipeline(inst, config.options, config.params, model, lt)
        return row_from(name, run)
    except Exception as exc:  # a failed row must not stop the run
        return BenchRow(name, inst.n, None, 0, 0, None, None, None, None, 0.0, 0.0,
                        None, None, None, f"error:{type(exc).__name__}")


def run_benchmark(config: BenchConfig) -> BenchTable:
    """One row per (instance, setting), in job order whatever the worker count."""
    jobs = _jobs(config)
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            rows = list(pool.map(lambda j: _run_job(config, j), jobs))
    else:
        rows = [_run_job(config, j) for j in jobs]
    return BenchTable(rows)


# ---------------------------------------------------------------------------
# graph size report


def report_graph_stats(instance: Instance, energy_model: Optional[EnergyModel] = None,
                       leg_times: Optional[LegTimes] = None) -> Tuple[BuildStats, str]:
    """Actual generated-graph size next to the worst-case bounds."""
    graph = build_generated_graph(instance, None, energy_model, leg_times)
    st = graph.stats
    lines = [st.line()]
    if st.bound_v:
        lines.append(f"RATIO V {st.n_vertices}/{st.bound_v} = {st.ratio_v:.3f}%  "
                     f"A {st.n_arcs}/{st.bound_a} = {st.ratio_a:.3f}%")
    else:
        lines.append("RATIO NA (no trip bound)")
    if not graph.feasible:
        lines.append("INFEASIBLE requests " + " ".join(map(str, graph.infeasible_requests)))
    return st, "\n".join(lines)


__all__ = [
    "CSV_COLUMNS", "PipelineResult", "generator_config", "energy_model_for", "leg_times_for",
    "run_pipeline", "BenchRow", "gap_percent", "row_from", "rows_to_csv", "rows_from_csv",
    "format_table", "summarize", "BenchConfig", "BenchTable", "run_benchmark",
    "report_graph_stats", "vertex_bound", "arc_bound",
]
