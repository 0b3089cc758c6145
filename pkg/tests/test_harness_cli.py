import json

import pytest

from drp import catalog, cli
from drp.formulation import FormulationOptions
from drp.harness import (
    CSV_COLUMNS,
    BenchConfig,
    BenchRow,
    gap_percent,
    report_graph_stats,
    rows_from_csv,
    rows_to_csv,
    run_benchmark,
    run_pipeline,
)


def test_pipeline_pair():
    run = run_pipeline(catalog.pair("RE"))
    assert run.status == "optimal"
    assert run.result.objective == pytest.approx(35.0)
    assert run.report.ok
    assert run.prep_seconds >= 0 and run.solve_seconds >= 0


def test_pipeline_infeasible_instance():
    from drp.instance import EnergySpec, make_instance

    inst = make_instance([(1, 0)], [3.0], capacity=1, energy=EnergySpec("linear", (1.0, 1.0)))
    run = run_pipeline(inst)
    assert run.status == "infeasible" and run.result is None


def test_benchmark_rows_and_csv():
    table = run_benchmark(BenchConfig(sizes=[3], seeds=[0, 1], settings=["R", "E"], named=["pair"]))
    assert [r.name for r in table.rows[:3]] == ["pair-R", "pair-E", "linear-corner-n3-s0-R"]
    assert len(table.rows) == 2 + 4
    text = table.csv()
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    assert rows_from_csv(text) == table.rows
    first = table.rows[0]
    assert first.UP == pytest.approx(12.0) and first.status == "optimal"
    assert first.V <= first.boundV and first.A <= first.boundA
    assert "SUMMARY rows=6" in table.text()


def test_benchmark_workers_keep_order():
    cfg = dict(sizes=[3], seeds=[0, 1, 2], settings=["RE"])
    serial = run_benchmark(BenchConfig(**cfg))
    par = run_benchmark(BenchConfig(**cfg, workers=2))
    assert [r.name for r in serial.rows] == [r.name for r in par.rows]
    assert [r.UP for r in serial.rows] == [r.UP for r in par.rows]


def test_empty_benchmark_is_header_only():
    assert rows_to_csv([]) == ",".join(CSV_COLUMNS) + "\n"


def test_csv_missing_values_round_trip():
    row = BenchRow("x", 3, None, 5, 6, None, None, None, None, 0.1, 0.2, None, None, None, "infeasible")
    assert rows_from_csv(rows_to_csv([row])) == [row]
    with pytest.raises(ValueError):
        rows_from_csv("bad,header\n")


def test_gap_percent():
    assert gap_percent(10.0, 9.0) == pytest.approx(10.0)
    assert gap_percent(None, 1.0) is None


def test_graph_report():
    st, text = report_graph_stats(catalog.four_spokes())
    assert st.n_vertices == 12 and st.n_arcs == 20
    assert "RATIO V 12/" in text


# --- command line ------------------------------------------------------------


def test_cli_solve_named(capsys):
    assert cli.main(["solve", "--instance", "pair", "--objective", "E"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "STATUS optimal UP 21" in out and "PASS" in out


def test_cli_hover_forced_wait(capsys):
    assert cli.main(["solve", "--instance", "forced-wait", "--hover"]) == cli.EXIT_OK
    assert "UP 6.3 " in capsys.readouterr().out


def test_cli_gen_solve_validate(tmp_path, capsys):
    inst = tmp_path / "i.txt"
    sol = tmp_path / "i.sol"
    assert cli.main(["gen", "--n", "4", "--seed", "3", "--out", str(inst)]) == 0
    assert cli.main(["solve", "--instance", str(inst), "--out", str(sol)]) == 0
    assert cli.main(["validate", "--instance", str(inst), "--solution", str(sol)]) == 0
    text = sol.read_text().splitlines()
    head = text[0].split()
    head[1] = repr(float(head[1]) + 1.0)
    sol.write_text("\n".join([" ".join(head)] + text[1:]) + "\n")
    assert cli.main(["validate", "--instance", str(inst), "--solution", str(sol)]) == cli.EXIT_INVALID
    capsys.readouterr()


def test_cli_oracle_matches_solve(capsys):
    cli.main(["oracle", "--instance", "pair", "--objective", "RE"])
    assert "OBJ 35" in capsys.readouterr().out


def test_cli_export_and_prep(tmp_path, capsys):
    out = tmp_path / "m.lp"
    assert cli.main(["export", "--instance", "pair", "--export", "lp", "--out", str(out)]) == 0
    assert out.read_bytes()
    assert cli.main(["prep", "--instance", "four-spokes"]) == 0
    assert "RATIO" in capsys.readouterr().out


def test_cli_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"instance": "pair", "objective": "R"}))
    cli.main(["solve", "--config", str(cfg)])
    assert "UP 12 " in capsys.readouterr().out
    cli.main(["solve", "--config", str(cfg), "--objective", "E"])
    assert "UP 21 " in capsys.readouterr().out
    cfg.write_text(json.dumps({"bogus": 1}))
    assert cli.main(["solve", "--config", str(cfg)]) == cli.EXIT_ERROR


def test_cli_bench_csv(tmp_path, capsys):
    out = tmp_path / "b.csv"
    assert cli.main(["bench", "--named", "pair", "--settings", "R,E,RE", "--out", str(out)]) == 0
    rows = rows_from_csv(out.read_text())
    assert [r.UP for r in rows] == pytest.approx([12.0, 21.0, 35.0])
    capsys.readouterr()


def test_cli_phase_generation(tmp_path, capsys):
    inst = tmp_path / "p.txt"
    assert cli.main(["gen", "--n", "3", "--energy", "phase", "--out", str(inst)]) == 0
    assert inst.with_suffix(".phase").exists()
    assert cli.main(["solve", "--instance", str(inst)]) == 0
    assert "PASS" in capsys.readouterr().out


def test_cli_missing_file(capsys):
    assert cli.main(["solve", "--instance", "/nonexistent/file.txt"]) == cli.EXIT_ERROR
