import itertools

import numpy as np
import pytest

from drp import catalog
from drp.energy import ConvexEnergy, LinearEnergy, TabulatedEnergy, trip_energy
from drp.graphgen import (
    all_feasible_loads,
    arc_bound,
    build_generated_graph,
    check_conditions_AB,
    compute_upmnr,
    find_feasible_loads,
    is_load_possible,
    mask_of,
    members,
    shortest_time_and_energy_tables,
    vertex_bound,
)
from drp.instance import generate_instance, make_instance, travel_tables
from drp.solver.oracle import brute_force_mnr


def _line_instance(overrides=()):
    return make_instance([(10, 1), (10, 2), (10, 3)], [0.2, 0.2, 0.2], capacity=1.0,
                         time_overrides=overrides, energy=None)


def test_masks():
    assert members(0b1011) == [1, 2, 4]
    assert mask_of([4, 1, 2]) == 0b1011


def test_four_spokes_loads_and_graph():
    inst = catalog.four_spokes()
    tables = travel_tables(inst)
    model = LinearEnergy(1, 1)
    loads = find_feasible_loads(inst, tables, model)
    assert sorted(map(tuple, map(members, loads))) == [(1,), (1, 4), (2,), (2, 4), (3,), (3, 4), (4,)]
    assert not is_load_possible(mask_of([1, 2]), inst, tables, model)
    assert is_load_possible(mask_of([1, 4]), inst, tables, model)
    g = build_generated_graph(inst, tables, model)
    assert len(g.vertices) == 12 and len(g.arcs) == 20
    from_s = [a for a in g.arcs if a.tail == g.start]
    into_e = [a for a in g.arcs if a.head == g.end]
    assert len(from_s) == 10 and len(into_e) == 4
    assert g.structural_issues() == []


def test_battery_rules_out_far_pair():
    inst = make_instance([(10, 0), (-10, 0)], [1, 1], capacity=2, battery=45.0)
    tables = travel_tables(inst)
    m = LinearEnergy(1.0, 1.0)
    assert trip_energy(m, [1, 2], inst, tables) > 45 and trip_energy(m, [2, 1], inst, tables) > 45
    assert not is_load_possible(0b11, inst, tables, m)
    assert is_load_possible(0b01, inst, tables, m)


def test_superset_pruning_skips_children_of_infeasible():
    inst = make_instance([(0, 1), (0, 2), (0, 3)], [0.3, 0.3, 0.3], capacity=0.6)
    loads = find_feasible_loads(inst, None, LinearEnergy(0, 1))
    assert mask_of([1, 2, 3]) not in loads and mask_of([1, 2]) in loads


def test_empty_and_single():
    empty = make_instance([], [], capacity=1)
    assert find_feasible_loads(empty, None, LinearEnergy(0, 1)) == []
    g = build_generated_graph(catalog.single(), None, LinearEnergy(1, 1))
    assert [v.kind for v in g.vertices] == ["start", "delivery", "end"]
    assert [(a.tail, a.head) for a in g.arcs] == [(0, 1), (1, 2)]


def test_pair_graph_and_upmnr():
    inst = catalog.pair()
    g = build_generated_graph(inst)
    assert (len(g.vertices), len(g.arcs)) == (6, 8)
    assert g.stats.upmnr >= brute_force_mnr(inst) == 2


def test_arc_payloads_and_energies():
    inst = catalog.pair()
    g = build_generated_graph(inst)
    m = LinearEnergy(1, 1)
    for a in g.arcs:
        head, tail = g.vertices[a.head], g.vertices[a.tail]
        if tail.kind == "start":
            assert a.payload == pytest.approx(sum(inst.demand(r) for r in members(head.load)))
        elif head.kind == "end":
            assert a.payload == 0
        else:
            assert a.payload == pytest.approx(sum(inst.demand(r) for r in members(tail.load) if r != tail.r))
        assert a.ed == pytest.approx(m.arc_energy(a.payload, a.t))


def test_equal_weight_vertices_share_hover_rate():
    g = build_generated_graph(catalog.four_spokes())
    seen = {}
    for v in g.delivery:
        w = round(sum(catalog.four_spokes().demand(r) for r in members(v.load)), 12)
        assert seen.setdefault(w, g.eh[v.id]) == g.eh[v.id]


def test_vertex_and_arc_bounds():
    assert vertex_bound(10, 4) == 1302
    assert vertex_bound(10, 5) == 2562
    assert arc_bound(10, 4) == 4640
    assert arc_bound(10, 5) == 10940
    for n in (1, 5, 17):
        assert vertex_bound(n, 1) == n + 2
        assert arc_bound(n, 1) == 2 * n
    with pytest.raises(ValueError):
        vertex_bound(5, 0)
    assert vertex_bound(150, 150) == 2 + 150 * 2 ** 149  # exact big integer


def test_singleton_graph_reaches_arc_bound():
    inst = make_instance([(1, 0), (0, 1), (2, 2)], [1, 1, 1], capacity=1.5)
    g = build_generated_graph(inst, None, LinearEnergy(0, 1))
    assert g.stats.upmnr == 1
    assert len(g.arcs) == g.stats.bound_a == 6 and g.stats.ratio_a == 100.0


def test_upmnr_capped_by_capacity():
    inst = make_instance([(1, 0), (0, 1), (2, 2)], [1, 1, 1], capacity=1.9)
    assert compute_upmnr(inst, None, LinearEnergy(0, 1)).value == 1


def test_conditions_metric_and_monotone():
    rep = check_conditions_AB(catalog.pair(), travel_tables(catalog.pair()), LinearEnergy(1, 1))
    assert rep.metric and rep.monotone
    bad = _line_instance(overrides=(((1, 3), 10.0), ((3, 1), 10.0), ((1, 2), 2.0), ((2, 1), 2.0),
                                     ((2, 3), 3.0), ((3, 2), 3.0)))
    assert not check_conditions_AB(bad, travel_tables(bad), LinearEnergy(0, 1)).metric


def test_non_monotone_model_counterexample():
    inst = make_instance([(0, 5), (0, 5.1)], [0.1, 1.0], capacity=2)
    odd = TabulatedEnergy([0.0, 0.1, 1.0, 1.1], [5.0, 5.0, 5.0, 0.1])
    rep = check_conditions_AB(inst, travel_tables(inst), odd)
    assert rep.metric and not rep.monotone and rep.counterexample["after"] < rep.counterexample["before"]


def test_shortest_path_corrections():
    bad = _line_instance(overrides=(((1, 3), 10.0), ((3, 1), 10.0), ((1, 2), 2.0), ((2, 1), 2.0),
                                     ((2, 3), 3.0), ((3, 2), 3.0)))
    tables = travel_tables(bad)
    corr = shortest_time_and_energy_tables(bad, tables, LinearEnergy(0, 1))
    assert corr.time()[1, 3] == pytest.approx(5.0)
    good = catalog.pair()
    gt = travel_tables(good)
    c2 = shortest_time_and_energy_tables(good, gt, ConvexEnergy(0.5, 1.5))
    assert np.allclose(c2.time(), gt.t)
    assert np.allclose(c2.energy(1.0), ConvexEnergy(0.5, 1.5).arc_energy_array(1.0, gt.t))


@pytest.mark.parametrize("energy", ["linear", "convex"])
def test_completeness_small(energy):
    for seed in range(3):
        inst = generate_instance(catalog.oracle_config(6, energy), seed)
        tables = travel_tables(inst)
        model = catalog.suite_model(energy)
        assert find_feasible_loads(inst, tables, model) == all_feasible_loads(inst, tables, model)


def test_parallel_enumeration_matches_serial():
    inst = generate_instance(catalog.oracle_config(7, "convex"), 4)
    assert find_feasible_loads(inst, workers=3) == find_feasible_loads(inst, workers=1)


def test_graph_dump_lines():
    text = build_generated_graph(catalog.pair()).dumps().splitlines()
    assert text[0].startswith("VERT 0 start") and text[-1].startswith("STATS 2 2 6 8 6 8 ")
    assert sum(1 for ln in text if ln.startswith("ARC")) == 8


def test_unreachable_request_flagged():
    inst = make_instance([(1, 0), (100, 0)], [1, 1], capacity=2, battery=50.0)
    g = build_generated_graph(inst, None, LinearEnergy(0, 1))
    assert not g.feasible and g.infeasible_requests == (2,)
