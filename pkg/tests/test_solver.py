import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from drp import catalog
from drp.formulation import FormulationOptions, build_model
from drp.graphgen import build_generated_graph
from drp.instance import EnergySpec, make_instance, travel_tables
from drp.solver import (
    ExtractionError,
    LpProblem,
    MilpParams,
    Solution,
    branch_and_bound,
    extract_solution,
    read_solution,
    relative_gap,
    solve_lp,
    solve_milp,
    validate_solution,
    write_solution,
)
from drp.solver.io import ModelFormatError, canonical, export_model, import_model
from drp.solver.oracle import OracleRefused, brute_force_solve
from drp.solver.solution import dumps_solution, loads_solution

INF = math.inf


# --- LP engine ---------------------------------------------------------------


def test_lp_single_bound():
    res = solve_lp(LpProblem([1.0], [[1.0]], [3.0], [INF], [0.0], [INF]))
    assert res.optimal and res.objective == pytest.approx(3.0)


def test_lp_contradictory_rows():
    A = [[1.0], [1.0]]
    res = solve_lp(LpProblem([1.0], A, [3.0, -INF], [INF, 2.0], [0.0], [INF]))
    assert res.status == "infeasible"


def test_lp_unbounded():
    res = solve_lp(LpProblem([-1.0], [[1.0]], [0.0], [INF], [0.0], [INF]))
    assert res.status == "unbounded"


def test_lp_small_textbook():
    # max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18
    A = [[1, 0], [0, 2], [3, 2]]
    res = solve_lp(LpProblem([-3, -5], A, [-INF] * 3, [4, 12, 18], [0, 0], [INF, INF]))
    assert res.objective == pytest.approx(-36.0)
    assert res.x == pytest.approx([2.0, 6.0])


def test_lp_shape_check():
    with pytest.raises(ValueError):
        LpProblem([1.0, 2.0], [[1.0]], [0.0], [1.0], [0.0], [1.0])


@settings(max_examples=40, deadline=None, derandomize=True)
@given(st.integers(0, 10**6))
def test_lp_matches_scipy(seed):
    scipy_opt = pytest.importorskip("scipy.optimize")
    rng = np.random.default_rng(seed)
    m, n = rng.integers(1, 6), rng.integers(1, 6)
    A = rng.integers(-3, 4, size=(m, n)).astype(float)
    c = rng.integers(-3, 4, size=n).astype(float)
    lo = np.where(rng.random(m) < 0.5, -INF, rng.integers(-5, 1, size=m))
    hi = np.where(rng.random(m) < 0.3, INF, rng.integers(1, 8, size=m))
    ub = rng.integers(1, 6, size=n).astype(float)
    res = solve_lp(LpProblem(c, A, lo, hi, np.zeros(n), ub))
    cons = scipy_opt.LinearConstraint(A, lo, hi)
    ref = scipy_opt.milp(c, constraints=cons, bounds=scipy_opt.Bounds(0, ub), integrality=np.zeros(n))
    if ref.status == 2:
        assert res.status == "infeasible"
    else:
        assert res.optimal
        assert res.objective == pytest.approx(ref.fun, abs=1e-7)


# --- branch-and-bound --------------------------------------------------------


@pytest.mark.parametrize("setting,expected", [("R", 12.0), ("E", 21.0), ("RE", 35.0)])
def test_pair_optimum(pair_bundle, setting, expected):
    inst, tables, g, m = pair_bundle[setting]
    res, sol = solve_milp(m, g, inst, tables=tables)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(expected, rel=1e-9)
    assert res.gap <= 1e-4
    assert validate_solution(sol, inst, tables).ok


def test_bnb_is_reproducible(pair_bundle):
    inst, tables, g, m = pair_bundle["RE"]
    a = branch_and_bound(m)
    b = branch_and_bound(m)
    assert a.x.tobytes() == b.x.tobytes()
    assert a.nodes == b.nodes and a.objective == b.objective


def test_bnb_threads_same_optimum(pair_bundle):
    inst, tables, g, m = pair_bundle["E"]
    assert branch_and_bound(m, threads=2).objective == pytest.approx(branch_and_bound(m).objective)


def test_bnb_param_checks(pair_bundle):
    m = pair_bundle["R"][3]
    with pytest.raises(ValueError):
        branch_and_bound(m, gap=-1)
    with pytest.raises(ValueError):
        branch_and_bound(m, MilpParams(threads=0))


def test_node_limit_reports_gap():
    inst = catalog.four_spokes("RE")
    g = build_generated_graph(inst)
    res = branch_and_bound(build_model(g, inst), node_limit=1)
    assert res.status in ("optimal", "gap_limit", "node_limit", "time_limit")
    if res.status != "optimal":
        assert res.bound <= res.objective or not res.has_solution


def test_relative_gap():
    assert relative_gap(10.0, 9.0) == pytest.approx(0.1)
    assert relative_gap(10.0, 11.0) == 0.0
    assert relative_gap(INF, 1.0) == INF


def test_accept_hook_vetoes(pair_bundle):
    m = pair_bundle["R"][3]
    res = branch_and_bound(m, accept=lambda x: False)
    assert not res.has_solution and res.rejected > 0


# --- extraction and validation -------------------------------------------------


def test_extraction_rejects_empty_selection(pair_bundle):
    inst, tables, g, m = pair_bundle["R"]
    with pytest.raises(ExtractionError):
        extract_solution(m, np.zeros(m.n_vars), g, inst, tables)


def test_validator_names_capacity_violation():
    inst = catalog.four_spokes()
    sol = Solution(routes=[[[1, 2, 3, 4]]], objective=math.nan)
    rep = validate_solution(sol, inst)
    assert not rep.ok and any("exceeds capacity" in v for v in rep.violations)


def test_validator_names_battery_violation():
    inst = make_instance([(5, 0), (0, 5)], [0.1, 0.1], capacity=1, battery=12,
                         energy=EnergySpec("linear", (1.0, 1.0)))
    rep = validate_solution(Solution(routes=[[[1, 2]]], objective=math.nan), inst)
    assert any("exceeds battery" in v for v in rep.violations)


def test_validator_counts_coverage_and_drones():
    inst = catalog.pair()
    rep = validate_solution(Solution(routes=[[[1]], [[1]], [[2]]], objective=math.nan), inst)
    text = " ".join(rep.violations)
    assert "served 2 times" in text and "3 drones used" in text


def test_validator_checks_windows():
    inst = catalog.forced_wait()
    rep = validate_solution(Solution(routes=[[[2, 1]]], objective=math.nan), inst)
    assert any("after window close" in v for v in rep.violations)


def test_validator_checks_objective(pair_bundle):
    inst, tables, g, m = pair_bundle["RE"]
    _, sol = solve_milp(m, g, inst, tables=tables)
    sol.objective += 1.0
    assert any("does not match" in v for v in validate_solution(sol, inst, tables).violations)


# --- oracle ------------------------------------------------------------------


def test_oracle_single_request():
    inst = catalog.single(5.0, "R")
    res = brute_force_solve(inst)
    assert res.objective == pytest.approx(10.0)
    assert res.solution.routes == [[[1]]]


def test_oracle_infeasible():
    inst = make_instance([(30, 0)], [1], capacity=1, battery=10, energy=EnergySpec("linear", (1.0, 1.0)))
    assert brute_force_solve(inst).status == "infeasible"


def test_oracle_refuses_large():
    inst = make_instance([(i, 0) for i in range(1, 16)], [0.1] * 15, capacity=1,
                         energy=EnergySpec("linear", (1.0, 1.0)))
    with pytest.raises(OracleRefused):
        brute_force_solve(inst)


@pytest.mark.parametrize("setting,expected", [("R", 12.0), ("E", 21.0), ("RE", 35.0)])
def test_oracle_pair(setting, expected):
    assert brute_force_solve(catalog.pair(setting)).objective == pytest.approx(expected)


# --- files -----------------------------------------------------------------------


def test_solution_round_trip(tmp_path, pair_bundle):
    inst, tables, g, m = pair_bundle["RE"]
    _, sol = solve_milp(m, g, inst, tables=tables)
    path = tmp_path / "pair.sol"
    write_solution(sol, path)
    back = read_solution(path)
    assert back.routes == sol.routes
    assert back.objective == sol.objective
    assert back.y == sol.y and back.f == sol.f
    assert dumps_solution(back) == dumps_solution(sol)


def test_solution_parse_error():
    with pytest.raises(ValueError):
        loads_solution("ROUTE nonsense\n")


@pytest.mark.parametrize("fmt", ["mps", "lp"])
@pytest.mark.parametrize("options", [FormulationOptions(), FormulationOptions(hover=True, cuts=True)])
def test_model_export_round_trip(fmt, options):
    inst = catalog.pair("RE")
    g = build_generated_graph(inst)
    m = build_model(g, inst, options)
    back = import_model(export_model(m, fmt), fmt)
    assert canonical(back) == canonical(m)
    assert branch_and_bound(back).objective == pytest.approx(branch_and_bound(m).objective, rel=1e-9)


def test_unknown_format():
    with pytest.raises(ModelFormatError):
        export_model(build_model(build_generated_graph(catalog.pair()), catalog.pair()), "xml")


def test_external_milp_agrees(pair_bundle):
    scipy_opt = pytest.importorskip("scipy.optimize")
    inst, tables, g, m = pair_bundle["RE"]
    c, A, lo, hi, clo, chi = m.dense()
    integ = np.array([v.kind != "continuous" for v in m.variables], dtype=int)
    ref = scipy_opt.milp(c, constraints=scipy_opt.LinearConstraint(A, lo, hi),
                         bounds=scipy_opt.Bounds(clo, chi), integrality=integ)
    assert ref.success
    assert ref.fun + m.obj_const == pytest.approx(branch_and_bound(m).objective, rel=1e-6)
