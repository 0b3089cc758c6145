"""LP engine, branch-and-bound, model files, solutions and the reference oracle."""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

from ..formulation import MilpModel
from ..graphgen import GeneratedGraph
from ..instance import Instance, LegTimes, TravelTables, travel_tables
from .bnb import MilpParams, MilpResult, branch_and_bound, lp_relaxation_bound, relative_gap
from .lp import LpProblem, LpResult, LpStallError, SimplexEngine, solve_lp
from .solution import (
    ExtractionError,
    Solution,
    ValidationReport,
    extract_solution,
    read_solution,
    validate_solution,
    write_solution,
)

__all__ = [
    "LpProblem", "LpResult", "LpStallError", "SimplexEngine", "solve_lp",
    "MilpParams", "MilpResult", "branch_and_bound", "lp_relaxation_bound", "relative_gap",
    "Solution", "ValidationReport", "ExtractionError", "extract_solution", "validate_solution",
    "read_solution", "write_solution", "solve_milp",
]


def solve_milp(model: MilpModel, graph: Optional[GeneratedGraph] = None, instance: Optional[Instance] = None,
               params: Optional[MilpParams] = None, tables: Optional[TravelTables] = None,
               energy_model=None, leg_times: Optional[LegTimes] = None,
               validate: bool = True, **overrides) -> Tuple[MilpResult, Optional[Solution]]:
    """Branch-and-bound plus solution extraction.

    With ``graph`` and ``instance`` given, every candidate incumbent is
    decoded into routes and, if ``validate``, checked by the independent
    validator; candidates that fail are refused.
    """
    if (graph is None) != (instance is None):
        raise ValueError("pass both graph and instance, or neither")
    if graph is None:
        return branch_and_bound(model, params, **overrides), None
    tables = tables or travel_tables(instance)
    hover = bool(model.meta.get("hover"))
    reports = []

    def accept(x: np.ndarray) -> bool:
        try:
            sol = extract_solution(model, x, graph, instance, tables)
        except ExtractionError as exc:
            reports.append(str(exc))
            return False
        if validate:
            rep = validate_solution(sol, instance, tables, energy_model, hover=hover, leg_times=leg_times)
            if not rep.ok:
                reports.append(str(rep))
                return False
        return True

    res = branch_and_bound(model, params, accept, **overrides)
    if res.x is None:
        return res, None
    sol = extract_solution(model, res.x, graph, instance, tables)
    sol.gap = res.gap
    sol.bound = res.bound
    res.rejections = reports
    return res, sol
