import math

import pytest
from hypothesis import given, settings, strategies as st

from drp import catalog
from drp.instance import (
    GeneratorConfig,
    InstanceError,
    ParseError,
    dumps,
    generate_instance,
    loads,
    make_instance,
    read_instance,
    travel_tables,
    write_instance,
)


def test_corner_and_center_depots():
    a = generate_instance(GeneratorConfig(n=10, depot_style="corner"), 7)
    b = generate_instance(GeneratorConfig(n=10, depot_style="center", area_size=50.0), 7)
    assert a.n == 10 and a.depot == (0.0, 0.0)
    assert b.depot == (25.0, 25.0)


def test_generation_is_deterministic():
    cfg = catalog.oracle_config(6, "convex")
    assert dumps(generate_instance(cfg, 11)) == dumps(generate_instance(cfg, 11))
    assert dumps(generate_instance(cfg, 11)) != dumps(generate_instance(cfg, 12))


@pytest.mark.parametrize("bad", [
    dict(n=0), dict(n=3, area_size=0.0), dict(n=3, demand_range=(0.5, 0.2)),
    dict(n=3, depot_style="edge"), dict(n=3, window_style="tight"),
])
def test_generator_rejects_bad_config(bad):
    with pytest.raises(InstanceError):
        generate_instance(GeneratorConfig(**bad), 0)


def test_random_windows_lie_inside_horizon():
    inst = generate_instance(catalog.oracle_config(8), 3)
    for r in inst.requests:
        assert 0 <= r.a <= r.b <= 120


def test_round_trip_named_instances(tmp_path):
    for name, make in catalog.NAMED.items():
        inst = make()
        p = tmp_path / f"{name}.drp"
        write_instance(inst, p)
        assert read_instance(p) == inst


def test_round_trip_generated_with_overrides():
    inst = make_instance([(1.5, 2.25), (3, 4)], [0.5, 0.25], drones=2, capacity=1.0,
                         time_overrides=(((1, 2), 7.5),), cost_overrides=(((2, 1), 1.25),))
    assert loads(dumps(inst)) == inst


def _params_line(fields):
    return "DRP 1\nPARAMS " + " ".join(fields) + "\nDEPOT 0 0\nREQ 1 1 1 0.5 0 10\n"


def test_missing_capacity_names_field():
    with pytest.raises(ParseError, match="missing capacity") as exc:
        loads(_params_line(["1", "1"]))
    assert exc.value.line == 2


def test_negative_demand_rejected_with_line():
    text = "DRP 1\nPARAMS 1 1 2 10 1 1 1 0 100 obj=R\nDEPOT 0 0\nREQ 1 1 1 -1 0 10\n"
    with pytest.raises(ParseError, match="negative demand") as exc:
        loads(text)
    assert exc.value.line == 4


@pytest.mark.parametrize("text,msg", [
    ("", "header"),
    ("DRP 2\n", "version"),
    ("DRP 1\nPARAMS 1 1 2 10 1 1 1 0 100 obj=R\n", "DEPOT"),
    ("DRP 1\nPARAMS 2 1 2 10 1 1 1 0 100 obj=R\nDEPOT 0 0\nREQ 1 1 1 1 0 10\n", "declares 2"),
    ("DRP 1\nPARAMS 1 1 2 10 1 1 1 0 100 obj=X\nDEPOT 0 0\nREQ 1 1 1 1 0 10\n", "objective"),
    ("DRP 1\nPARAMS 1 1 2 10 1 1 1 0 100 obj=R\nDEPOT 0 0\nREQ 1 1 1 1 5 1\n", "window"),
    ("DRP 1\nPARAMS 1 1 2 10 1 1 1 0 100 obj=R\nDEPOT 0 0\nREQ 1 1 1 1 0 10\nFOO 1\n", "unknown record"),
])
def test_parse_errors(text, msg):
    with pytest.raises(ParseError, match=msg):
        loads(text)


def test_travel_table_345():
    inst = make_instance([(3, 4)], [1], capacity=1, speed=1.0, cost_per_distance=2.0)
    t = travel_tables(inst)
    assert t.t[0, 1] == pytest.approx(5.0)
    assert t.c[0, 1] == pytest.approx(10.0)
    assert t.t[0, 2] == 0.0 and t.t[1, 2] == pytest.approx(5.0)


def test_time_override_applies():
    inst = make_instance([(3, 4), (0, 1)], [1, 1], capacity=2, time_overrides=(((1, 2), 9.0),))
    assert travel_tables(inst).t[1, 2] == 9.0


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 9), st.integers(0, 10_000), st.sampled_from(["corner", "center"]))
def test_euclidean_tables_symmetric_and_metric(n, seed, depot):
    inst = generate_instance(GeneratorConfig(n=n, depot_style=depot), seed)
    t = travel_tables(inst).t
    assert (abs(t - t.T) < 1e-12).all()
    k = t.shape[0]
    for i in range(k):
        for j in range(k):
            assert t[i, j] >= 0
            for m in range(k):
                assert t[i, m] <= t[i, j] + t[j, m] + 1e-9


def test_objective_settings_zero_weights():
    inst = catalog.pair("R")
    assert inst.energy_weight == 0.0 and inst.routing_weight == 1.0
    e = inst.with_objective("E")
    assert e.routing_weight == 0.0 and e.energy_weight == e.energy_cost
    assert math.isinf(catalog.four_spokes().battery)
