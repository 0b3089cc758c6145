import os

import pytest

from drp import catalog
from drp.graphgen import build_generated_graph
from drp.formulation import FormulationOptions, build_model
from drp.instance import travel_tables


@pytest.fixture(scope="session")
def pair_bundle():
    """Pair-instance graph, tables and one core model per objective setting."""
    out = {}
    for s in ("R", "E", "RE"):
        inst = catalog.pair(s)
        tables = travel_tables(inst)
        g = build_generated_graph(inst, tables)
        out[s] = (inst, tables, g, build_model(g, inst, FormulationOptions(), tables))
    return out


def pytest_report_header(config):
    from drp import kernels
    return f"drp kernels: {kernels.IMPLEMENTATION}" + (" (forced)" if os.environ.get("DRP_PURE_PYTHON") else "")


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Records one PASS/FAIL line for a criterion and fails the test on FAIL."""

    def record(k: int, ok: bool, detail: str) -> None:
        line = f"CRITERION {k:>2} {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
