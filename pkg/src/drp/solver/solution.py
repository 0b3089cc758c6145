"""Solutions: extraction from MILP values, independent validation, text IO."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from ..energy import EnergyModel, load_weight, trip_energy, trip_legs
from ..formulation import MilpModel
from ..graphgen import GeneratedGraph, resolve_model
from ..instance import Instance, LegTimes, ParseError, TravelTables, travel_tables

TIME_TOL = 1e-6


class ExtractionError(RuntimeError):
    """Arc values do not decompose into depot-to-depot trips."""


@dataclass
class Solution:
    routes: List[List[List[int]]]  # drone -> trips -> request ids
    objective: float
    transport: float = 0.0
    energy: float = 0.0
    hover: float = 0.0
    y: Dict[int, float] = field(default_factory=dict)
    f: Dict[int, float] = field(default_factory=dict)
    r: Dict[int, float] = field(default_factory=dict)  # arrival per request (hover model)
    gap: float = 0.0
    bound: float = math.nan

    @property
    def trips(self) -> List[List[int]]:
        return [t for route in self.routes for t in route]

    @property
    def n_trips(self) -> int:
        return len(self.trips)

    def structure(self) -> tuple:
        """Canonical form: routes as sorted tuples of trip tuples (drone order ignored)."""
        return tuple(sorted(tuple(tuple(t) for t in route) for route in self.routes if route))


# ---------------------------------------------------------------------------
# extraction


def extract_solution(model: MilpModel, x: np.ndarray, graph: GeneratedGraph, instance: Instance,
                     tables: Optional[TravelTables] = None, tol: float = 1e-6) -> Solution:
    """Decompose the selected arcs into trips and link trips into routes."""
    tables = tables or travel_tables(instance)
    xs = {a: x[j] for (_, a), j in model.roles_of("x").items()}
    for a, v in xs.items():
        if abs(v - round(v)) > tol:
            raise ExtractionError(f"arc {a} has fractional value {v}")
    chosen = {a for a, v in xs.items() if v > 0.5}
    out: Dict[int, List[int]] = {}
    for a in sorted(chosen):
        out.setdefault(graph.arcs[a].tail, []).append(a)
    trips, vtrips = [], []
    starts = out.get(graph.start, [])
    if instance.n and not starts:
        raise ExtractionError("no trip leaves the start depot")
    used = set()
    for a0 in starts:
        seq, verts = [], []
        a = a0
        for _ in range(len(graph.vertices) + 1):
            used.add(a)
            head = graph.arcs[a].head
            if head == graph.end:
                break
            seq.append(graph.vertices[head].r)
            verts.append(head)
            nxt = [b for b in out.get(head, []) if b not in used]
            if len(nxt) != 1:
                raise ExtractionError(f"vertex {head} has {len(nxt)} unused outgoing arcs")
            a = nxt[0]
        else:
            raise ExtractionError("trip does not reach the end depot")
        trips.append(seq)
        vtrips.append(verts)
    if used != chosen:
        raise ExtractionError(f"{len(chosen - used)} selected arcs lie on no depot-to-depot path")
    served = sorted(r for t in trips for r in t)
    if served != list(range(1, instance.n + 1)):
        raise ExtractionError(f"requests served {served} do not cover 1..{instance.n}")

    # trip successor links
    succ: Dict[int, int] = {}
    first = {t[0]: k for k, t in enumerate(trips)}
    last = {t[-1]: k for k, t in enumerate(trips)}
    firstv = {vt[0]: k for k, vt in enumerate(vtrips)}
    lastv = {vt[-1]: k for k, vt in enumerate(vtrips)}
    for key, j in model.roles.items():
        if x[j] <= 0.5:
            continue
        if key[0] == "z":
            a, b = last.get(key[1]), first.get(key[2])
        elif key[0] == "zv":
            a, b = lastv.get(key[1]), firstv.get(key[2])
        else:
            continue
        if a is None or b is None or a == b:
            raise ExtractionError(f"link {key} does not join two trips")
        succ[a] = b
    has_pred = set(succ.values())
    routes, seen = [], set()
    for k in range(len(trips)):
        if k in has_pred:
            continue
        route = []
        while k is not None and k not in seen:
            seen.add(k)
            route.append(trips[k])
            k = succ.get(k)
        routes.append(route)
    for k in range(len(trips)):  # cycles of links (zero-length legs only)
        if k not in seen:
            route = []
            while k is not None and k not in seen:
                seen.add(k)
                route.append(trips[k])
                k = succ.get(k)
            routes.append(route)

    sol = Solution(routes=routes, objective=model.objective_value(x))
    rw, ew = instance.routing_weight, instance.energy_weight
    for a in chosen:
        arc = graph.arcs[a]
        sol.transport += rw * arc.c
        sol.energy += ew * arc.ed
    sol.hover = sol.objective - sol.transport - sol.energy
    for (_, i), j in model.roles_of("y").items():
        sol.y[i] = float(x[j])
    _propagate(sol, graph, vtrips, instance)
    if model.meta.get("hover"):
        for (_, v), j in model.roles_of("r").items():
            if v in {u for vt in vtrips for u in vt}:
                sol.r[graph.vertices[v].r] = float(x[j])
    return sol


def _propagate(sol: Solution, graph: GeneratedGraph, vtrips, instance: Instance) -> None:
    """Energy trace recomputed along the chosen arcs (independent of ``f`` values)."""
    arc_of = {(a.tail, a.head): a for a in graph.arcs}
    top = 0.0
    for verts in vtrips:
        used = 0.0
        prev = graph.start
        for v in verts:
            used += arc_of[prev, v].ed
            sol.f[graph.vertices[v].r] = used
            prev = v
        used += arc_of[prev, graph.end].ed
        top = max(top, used)
    sol.f[0] = 0.0
    sol.f[instance.n + 1] = top


# ---------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    violations: List[str]
    objective: float
    transport: float
    energy: float
    hover: float

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        head = "PASS" if self.ok else "FAIL"
        return "\n".join([f"{head} objective={self.objective:.9g}"] + [f"  - {v}" for v in self.violations])


def _close(a: float, b: float, rel: float) -> bool:
    return abs(a - b) <= rel * max(1.0, abs(a), abs(b))


def validate_solution(solution: Solution, instance: Instance, tables: Optional[TravelTables] = None,
                      model: Optional[EnergyModel] = None, hover: bool = False,
                      leg_times: Optional[LegTimes] = None, rel_tol: float = 1e-6) -> ValidationReport:
    """Check a solution against the problem rules without using the MILP.

    Without ``hover`` the schedule is rebuilt by earliest-start propagation
    (waiting is free). With ``hover`` the solution's own service times are
    checked and its waits priced with the hover power of the load aboard.
    """
    tables = tables or travel_tables(instance)
    model = resolve_model(instance, model)
    leg = leg_times or LegTimes(tables)
    bad: List[str] = []
    n = instance.n
    seen: Dict[int, int] = {}
    for trip in solution.trips:
        for r in trip:
            if not 1 <= r <= n:
                bad.append(f"unknown request {r}")
            seen[r] = seen.get(r, 0) + 1
    for r in range(1, n + 1):
        if seen.get(r, 0) != 1:
            bad.append(f"request {r} served {seen.get(r, 0)} times")
    used_drones = sum(1 for route in solution.routes if route)
    if used_drones > instance.drones:
        bad.append(f"{used_drones} drones used, only {instance.drones} available")
    if bad:
        return ValidationReport(bad, math.nan, math.nan, math.nan, math.nan)

    rw, ew = instance.routing_weight, instance.energy_weight
    transport = energy = hover_cost = 0.0
    Q, M = instance.capacity, instance.battery
    a_d, b_d = instance.depot_window
    for d, route in enumerate(solution.routes):
        ready = a_d
        for k, trip in enumerate(route):
            tag = f"drone {d} trip {k} {list(trip)}"
            w = load_weight(instance, trip)
            if w > Q + 1e-9 * max(1.0, Q):
                bad.append(f"{tag}: load {w:g} exceeds capacity {Q:g}")
            legs = list(trip_legs(trip, instance, tables, leg))
            e_trip = trip_energy(model, trip, instance, tables, leg)
            transport += rw * sum(float(tables.c[i, j]) for i, j, _, _ in legs)
            energy += ew * e_trip
            if hover:
                ok, h_energy, ready = _check_hover_trip(solution, trip, legs, instance, model, ready, tag, bad)
                hover_cost += ew * h_energy
                e_trip += h_energy
            else:
                clock = ready
                for i, j, _, dt in legs:
                    clock += dt
                    lo, hi = instance.window(j)
                    if clock > hi + TIME_TOL:
                        where = "end depot" if j == n + 1 else f"request {j}"
                        bad.append(f"{tag}: arrival {clock:g} at {where} after window close {hi:g}")
                        break
                    clock = max(clock, lo)
                ready = clock
            if e_trip > M + 1e-9 * max(1.0, M) + 1e-9:
                bad.append(f"{tag}: energy {e_trip:g} exceeds battery {M:g}")
    total = transport + energy + hover_cost
    if math.isfinite(solution.objective) and not _close(total, solution.objective, rel_tol):
        bad.append(f"objective {solution.objective:.9g} does not match recomputed {total:.9g}")
    return ValidationReport(bad, total, transport, energy, hover_cost)


def _check_hover_trip(sol: Solution, trip, legs, instance, model, ready, tag, bad):
    """Check the claimed service times of one trip; return (ok, hover energy, return time)."""
    ok = True
    h = 0.0
    prev_time = None
    for k, (i, j, _, dt) in enumerate(legs[:-1]):
        y = sol.y.get(j)
        if y is None:
            bad.append(f"{tag}: no service time for request {j}")
            return False, 0.0, ready
        lo, hi = instance.window(j)
        if y < lo - TIME_TOL or y > hi + TIME_TOL:
            bad.append(f"{tag}: service {y:g} at request {j} outside [{lo:g}, {hi:g}]")
            ok = False
        earliest = (ready if k == 0 else prev_time) + dt
        if y < earliest - TIME_TOL:
            bad.append(f"{tag}: service {y:g} at request {j} before arrival {earliest:g}")
            ok = False
        if k > 0:
            aboard = [r for r in trip[k:]]
            h += model.hover_power(load_weight(instance, aboard)) * max(0.0, y - earliest)
        prev_time = y
    back = (prev_time if prev_time is not None else ready) + legs[-1][3]
    if back > instance.depot_window[1] + TIME_TOL:
        bad.append(f"{tag}: return {back:g} after depot close {instance.depot_window[1]:g}")
        ok = False
    return ok, h, back


# ---------------------------------------------------------------------------
# solution file


def _trip_text(trip) -> str:
    return "trip( " + " ".join(str(r) for r in trip) + " )"


def dumps_solution(sol: Solution) -> str:
    lines = [f"SOL {float(sol.objective)!r} {sol.gap!r}"]
    for d, route in enumerate(sol.routes):
        lines.append(f"ROUTE {d} : " + " ".join(_trip_text(t) for t in route))
    for i in sorted(sol.y):
        lines.append(f"Y {i} {float(sol.y[i])!r}")
    for i in sorted(sol.f):
        lines.append(f"F {i} {float(sol.f[i])!r}")
    for i in sorted(sol.r):
        lines.append(f"R {i} {float(sol.r[i])!r}")
    return "\n".join(lines) + "\n"


def loads_solution(text: str) -> Solution:
    sol: Optional[Solution] = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tok = line.split()
        try:
            if tok[0] == "SOL":
                if len(tok) != 3:
                    raise ParseError("SOL needs objective and gap", ln)
                sol = Solution(routes=[], objective=float(tok[1]), gap=float(tok[2]))
                continue
            if sol is None:
                raise ParseError("missing SOL header", ln)
            if tok[0] == "ROUTE":
                if len(tok) < 3 or tok[2] != ":":
                    raise ParseError("ROUTE needs 'ROUTE d : trip( .. ) ...'", ln)
                route, cur = [], None
                for t in tok[3:]:
                    if t == "trip(":
                        cur = []
                    elif t == ")":
                        if cur is None:
                            raise ParseError("unbalanced ')'", ln)
                        route.append(cur)
                        cur = None
                    elif cur is None:
                        raise ParseError(f"token {t!r} outside trip( )", ln)
                    else:
                        cur.append(int(t))
                if cur is not None:
                    raise ParseError("unterminated trip(", ln)
                sol.routes.append(route)
            elif tok[0] in ("Y", "F", "R") and len(tok) == 3:
                getattr(sol, tok[0].lower())[int(tok[1])] = float(tok[2])
            else:
                raise ParseError(f"unknown record {tok[0]!r}", ln)
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(str(exc), ln) from None
    if sol is None:
        raise ParseError("empty solution file", 1)
    return sol


def write_solution(sol: Solution, path: Union[str, Path]) -> None:
    Path(path).write_text(dumps_solution(sol))


def read_solution(path: Union[str, Path]) -> Solution:
    return loads_solution(Path(path).read_text())
