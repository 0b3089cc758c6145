"""Command line front end: ``python -m drp <command> ...``.

Each stage can be run on its own. Settings come from flags first, then from
a JSON file given with ``--config``, then from built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Tuple

from . import catalog
from .energy import EnergyModel, model_from_spec, write_phase_table
from .formulation import FormulationOptions, build_model
from .graphgen import build_generated_graph
from .harness import (
    BenchConfig,
    energy_model_for,
    generator_config,
    leg_times_for,
    report_graph_stats,
    run_benchmark,
    run_pipeline,
)
from .instance import EnergySpec, Instance, dumps, generate_instance, read_instance, travel_tables
from .solver import MilpParams, read_solution, validate_solution, write_solution
from .solver.io import export_model
from .solver.oracle import OracleRefused, brute_force_solve
from .solver.solution import dumps_solution as dump_solution

DEFAULTS = {
    "instance": None,
    "seed": 0,
    "n": 5,
    "depot": "corner",
    "energy": "linear",
    "objective": None,
    "hover": False,
    "load_dependent": False,
    "cuts": False,
    "slowdown": 0.0,
    "gap": 1e-4,
    "time_limit": math.inf,
    "threads": 1,
    "branch_nu": False,
    "export": None,
    "out": None,
    "solution": None,
    "sizes": "",
    "seeds": "0",
    "settings": "R,E,RE",
    "named": "",
    "workers": 1,
}

EXIT_OK, EXIT_ERROR, EXIT_INVALID = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="drp", description="Exact multi-trip drone routing.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, solve=False):
        sp.add_argument("--config", help="JSON file with default settings")
        sp.add_argument("--instance", help="instance file or a named instance (pair, four-spokes, ...)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--n", type=int)
        sp.add_argument("--depot", choices=["corner", "center"])
        sp.add_argument("--energy", choices=["linear", "convex", "phase"])
        sp.add_argument("--objective", choices=["R", "E", "RE"])
        sp.add_argument("--slowdown", type=float, help="per-kg flight time increase (load-dependent times)")
        sp.add_argument("--out")
        if solve:
            sp.add_argument("--hover", action="store_true", default=None)
            sp.add_argument("--load-dependent", action="store_true", default=None)
            sp.add_argument("--cuts", action="store_true", default=None)
            sp.add_argument("--gap", type=float)
            sp.add_argument("--time-limit", type=float)
            sp.add_argument("--threads", type=int)
            sp.add_argument("--branch-nu", action="store_true", default=None)
            sp.add_argument("--export", choices=["mps", "lp"])

    common(sub.add_parser("gen", help="generate a random instance"))
    common(sub.add_parser("prep", help="build the generated graph and print its size"))
    common(sub.add_parser("solve", help="solve with the MILP and validate"), solve=True)
    common(sub.add_parser("oracle", help="solve by exhaustive enumeration"), solve=True)
    v = sub.add_parser("validate", help="check a solution file")
    common(v, solve=True)
    v.add_argument("--solution", required=True)
    common(sub.add_parser("export", help="write the MILP as MPS or LP text"), solve=True)
    b = sub.add_parser("bench", help="run a benchmark suite and write CSV")
    common(b, solve=True)
    b.add_argument("--sizes", help="comma-separated request counts")
    b.add_argument("--seeds", help="comma-separated seeds")
    b.add_argument("--settings", help="comma-separated objective settings")
    b.add_argument("--named", help="comma-separated named instances")
    b.add_argument("--workers", type=int)
    return p


def resolve_settings(ns: argparse.Namespace) -> dict:
    """Merge flags over the config file over the defaults."""
    cfg = dict(DEFAULTS)
    if getattr(ns, "config", None):
        data = json.loads(Path(ns.config).read_text())
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update(data)
    for k, v in vars(ns).items():
        if k in cfg and v is not None:
            cfg[k] = v
    cfg["command"] = ns.command
    return cfg


def load_instance(cfg: dict) -> Tuple[Instance, Optional[EnergyModel]]:
    """The instance named or read from ``--instance``, else a generated one."""
    src = cfg["instance"]
    model = None
    if src is None:
        inst = generate_instance(generator_config(cfg["n"], cfg["depot"], cfg["energy"],
                                                  cfg["objective"] or "RE"), cfg["seed"])
        model = energy_model_for(cfg["energy"])
    elif src in catalog.NAMED:
        inst = catalog.NAMED[src]()
    else:
        inst = read_instance(src)
        if inst.energy is not None and inst.energy.kind == "phase":
            model = model_from_spec(inst.energy, Path(src).parent)
    if cfg["objective"]:
        inst = inst.with_objective(cfg["objective"])
    return inst, model


def _options(cfg: dict) -> FormulationOptions:
    return FormulationOptions(hover=bool(cfg["hover"]), load_dependent=bool(cfg["load_dependent"]),
                              cuts=bool(cfg["cuts"]))


def _params(cfg: dict) -> MilpParams:
    return MilpParams(gap=float(cfg["gap"]), time_limit=float(cfg["time_limit"]),
                      threads=int(cfg["threads"]), branch_nu=bool(cfg["branch_nu"]))


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _ints(s: str) -> List[int]:
    return [int(t) for t in str(s).split(",") if t.strip()]


def _strs(s: str) -> List[str]:
    return [t.strip() for t in str(s).split(",") if t.strip()]


def cmd_gen(cfg: dict) -> int:
    inst, model = load_instance(cfg)
    if model is not None:
        out = Path(cfg["out"]) if cfg["out"] else None
        table = (out.with_suffix(".phase") if out else Path(f"phase-n{inst.n}-s{cfg['seed']}.phase"))
        write_phase_table(table, model)
        inst = replace(inst, energy=EnergySpec("phase", (table.name,)))
    _emit(dumps(inst), cfg["out"])
    return EXIT_OK


def cmd_prep(cfg: dict) -> int:
    inst, model = load_instance(cfg)
    _, text = report_graph_stats(inst, model, leg_times_for(inst, cfg["slowdown"]))
    _emit(text, cfg["out"])
    return EXIT_OK


def cmd_solve(cfg: dict) -> int:
    inst, model = load_instance(cfg)
    lt = leg_times_for(inst, cfg["slowdown"])
    run = run_pipeline(inst, _options(cfg), _params(cfg), model, lt)
    print(run.graph.stats.line())
    if cfg["export"] and run.model is not None:
        path = Path(cfg["out"] or "model").with_suffix("." + cfg["export"])
        path.write_bytes(export_model(run.model, cfg["export"]))
        print(f"EXPORT {path}")
    if run.result is None:
        print("STATUS infeasible (requests " + " ".join(map(str, run.graph.infeasible_requests)) + ")")
        return EXIT_OK
    res = run.result
    print(f"STATUS {res.status} UP {res.objective:.9g} LB {res.bound:.9g} gap {res.gap:.3g} "
          f"nodes {res.nodes} prep_s {run.prep_seconds:.3f} solve_s {run.solve_seconds:.3f}")
    if run.solution is None:
        return EXIT_OK
    text = dump_solution(run.solution)
    if cfg["out"]:
        write_solution(run.solution, cfg["out"])
    else:
        sys.stdout.write(text)
    print(str(run.report))
    return EXIT_OK if run.report.ok else EXIT_INVALID


def cmd_oracle(cfg: dict) -> int:
    inst, model = load_instance(cfg)
    lt = leg_times_for(inst, cfg["slowdown"])
    tables = travel_tables(inst)
    try:
        res = brute_force_solve(inst, tables, model, lt, hover=bool(cfg["hover"]))
    except OracleRefused as exc:
        print(f"REFUSED {exc}")
        return EXIT_ERROR
    print(f"STATUS {res.status} OBJ {res.objective:.9g} trips {res.n_trips_enumerated}")
    if res.solution is not None:
        text = dump_solution(res.solution)
        _emit(text, cfg["out"])
    return EXIT_OK


def cmd_validate(cfg: dict) -> int:
    inst, model = load_instance(cfg)
    sol = read_solution(cfg["solution"])
    rep = validate_solution(sol, inst, travel_tables(inst), model, hover=bool(cfg["hover"]),
                            leg_times=leg_times_for(inst, cfg["slowdown"]))
    print(str(rep))
    return EXIT_OK if rep.ok else EXIT_INVALID


def cmd_export(cfg: dict) -> int:
    inst, model = load_instance(cfg)
    tables = travel_tables(inst)
    graph = build_generated_graph(inst, tables, model, leg_times_for(inst, cfg["slowdown"]))
    if not graph.feasible:
        print("infeasible instance: nothing to export")
        return EXIT_ERROR
    m = build_model(graph, inst, _options(cfg), tables, model)
    data = export_model(m, cfg["export"] or "mps")
    if cfg["out"]:
        Path(cfg["out"]).write_bytes(data)
    else:
        sys.stdout.write(data.decode())
    return EXIT_OK


def cmd_bench(cfg: dict) -> int:
    bc = BenchConfig(
        sizes=_ints(cfg["sizes"]), seeds=_ints(cfg["seeds"]), settings=_strs(cfg["settings"]),
        named=_strs(cfg["named"]) or ([cfg["instance"]] if cfg["instance"] else []),
        energy=cfg["energy"], depot=cfg["depot"], options=_options(cfg), params=_params(cfg),
        slowdown=float(cfg["slowdown"]), workers=int(cfg["workers"]),
    )
    table = run_benchmark(bc)
    print(table.text())
    if cfg["out"]:
        Path(cfg["out"]).write_text(table.csv())
    bad = [r for r in table.rows if r.status in ("invalid",) or r.status.startswith("error")]
    return EXIT_INVALID if bad else EXIT_OK


COMMANDS = {
    "gen": cmd_gen, "prep": cmd_prep, "solve": cmd_solve, "oracle": cmd_oracle,
    "validate": cmd_validate, "export": cmd_export, "bench": cmd_bench,
}


def main(argv: Optional[List[str]] = None) -> int:
    ns = _parser().parse_args(argv)
    try:
        cfg = resolve_settings(ns)
        return COMMANDS[ns.command](cfg)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
