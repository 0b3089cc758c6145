"""Load-indexed graph construction.

A delivery vertex ``(r, L)`` stands for "the drone is at request ``r`` carrying
the parcels in ``L``". Loads that cannot start a trip on their own (over
capacity, no battery- and window-feasible visiting order) are dropped, and so
are all of their supersets. Arc payloads, and therefore arc energies, become
constants, which is what makes the downstream model linear.

Loads are int bitmasks: bit ``r - 1`` marks request ``r``.
"""

from __future__ import annotations

import itertools
import math
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import kernels
from .energy import EnergyModel, load_weight, model_from_spec, trip_energy
from .instance import Instance, LegTimes, TravelTables, travel_tables

PRUNING_MODES = ("auto", "direct", "shortest-path", "capacity")


class GraphError(ValueError):
    pass


def members(mask: int) -> List[int]:
    """Request ids in a load bitmask, ascending."""
    out = []
    r = 1
    while mask:
        if mask & 1:
            out.append(r)
        mask >>= 1
        r += 1
    return out


def mask_of(requests: Sequence[int]) -> int:
    m = 0
    for r in requests:
        m |= 1 << (r - 1)
    return m


def resolve_model(instance: Instance, model: Optional[EnergyModel]) -> EnergyModel:
    if model is not None:
        return model
    if instance.energy is None:
        raise GraphError("instance has no ENERGY record and no model was given")
    return model_from_spec(instance.energy)


# ---------------------------------------------------------------------------
# conditions A/B and shortest-path corrections


@dataclass(frozen=True)
class ConditionReport:
    metric: bool
    monotone: bool
    counterexample: Optional[dict] = None

    @property
    def both(self) -> bool:
        return self.metric and self.monotone


def is_metric(t: np.ndarray, tol: float = 1e-9) -> bool:
    via = t[:, :, None] + t[None, :, :]  # via[i, j, k] = t[i, j] + t[j, k]
    return bool(np.all(t[:, None, :] <= via + tol))


def check_conditions_AB(instance: Instance, tables: TravelTables, model: EnergyModel,
                        leg_times: Optional[LegTimes] = None, max_checks: int = 20000,
                        seed: int = 0) -> ConditionReport:
    """Check metric travel times and subset-monotone trip energy.

    Monotonicity is accepted without testing when the model's energy is time
    times a nondecreasing rate, times are load-independent and metric.
    Otherwise every insertion of one request into every trip of at most two
    requests is priced; the first decrease found is returned as a
    counterexample. Above ``max_checks`` insertions a seeded sample is used.
    """
    metric = is_metric(tables.t)
    load_dep = leg_times is not None and leg_times.load_dependent
    if model.time_proportional and model.rate_increasing and metric and not load_dep:
        return ConditionReport(metric, True)
    n = instance.n
    reqs = range(1, n + 1)
    base_trips = [(r,) for r in reqs] + list(itertools.permutations(reqs, 2))
    checks = [(p, r, pos) for p in base_trips for r in reqs if r not in p for pos in range(len(p) + 1)]
    if len(checks) > max_checks:
        checks = random.Random(seed).sample(checks, max_checks)
    cache: Dict[tuple, float] = {}

    def price(trip):
        if trip not in cache:
            cache[trip] = trip_energy(model, trip, instance, tables, leg_times)
        return cache[trip]

    for p, r, pos in checks:
        grown = p[:pos] + (r,) + p[pos:]
        before, after = price(p), price(grown)
        if after < before - 1e-9 * max(1.0, abs(before)):
            cex = {"trip": list(p), "inserted": r, "position": pos, "before": before, "after": after}
            return ConditionReport(metric, False, cex)
    return ConditionReport(metric, True)


def floyd_warshall(w: np.ndarray) -> np.ndarray:
    d = np.array(w, dtype=float, copy=True)
    np.fill_diagonal(d, np.minimum(np.diag(d), 0.0))
    for k in range(d.shape[0]):
        np.minimum(d, d[:, k:k + 1] + d[k:k + 1, :], out=d)
    return d


class CorrectedTables:
    """Shortest-path travel times and per-payload shortest-path energies.

    Used only inside the load check when the plain tables break the metric or
    monotonicity assumptions; each payload weight is solved once and cached.
    """

    def __init__(self, tables: TravelTables, model: EnergyModel, leg_times: Optional[LegTimes] = None):
        self.tables = tables
        self.model = model
        self.leg_times = leg_times or LegTimes(tables)
        self._time: Dict[float, np.ndarray] = {}
        self._energy: Dict[float, np.ndarray] = {}

    def time(self, weight: float = 0.0) -> np.ndarray:
        key = weight if self.leg_times.load_dependent else 0.0
        if key not in self._time:
            self._time[key] = floyd_warshall(self.leg_times.matrix(key))
        return self._time[key]

    def energy(self, weight: float) -> np.ndarray:
        if weight not in self._energy:
            direct = self.model.arc_energy_array(weight, self.leg_times.matrix(weight))
            self._energy[weight] = floyd_warshall(direct)
        return self._energy[weight]


def shortest_time_and_energy_tables(instance: Instance, tables: TravelTables, model: EnergyModel,
                                    leg_times: Optional[LegTimes] = None) -> CorrectedTables:
    return CorrectedTables(tables, model, leg_times)


# ---------------------------------------------------------------------------
# loads


class LoadChecker:
    """Evaluates single-trip feasibility of loads for one instance."""

    def __init__(self, instance: Instance, tables: TravelTables, model: EnergyModel,
                 leg_times: Optional[LegTimes] = None, corrected: Optional[CorrectedTables] = None,
                 check_route: bool = True):
        self.instance = instance
        self.tables = tables
        self.model = model
        self.leg_times = leg_times or LegTimes(tables)
        self.corrected = corrected
        self.check_route = check_route
        n = instance.n
        self.a = np.array([instance.window(k)[0] for k in range(n + 2)])
        self.b = np.array([instance.window(k)[1] for k in range(n + 2)])
        self._weights: Dict[int, float] = {}

    def weight(self, mask: int) -> float:
        w = self._weights.get(mask)
        if w is None:
            w = load_weight(self.instance, members(mask))
            self._weights[mask] = w
        return w

    def fits(self, mask: int) -> bool:
        q = self.instance.capacity
        return self.weight(mask) <= q + 1e-9 * max(1.0, q)

    def order(self, mask: int) -> Optional[List[int]]:
        """A feasible visiting order for the load, or ``None``."""
        if not mask or not self.fits(mask):
            return None
        reqs = members(mask)
        if not self.check_route:
            return reqs
        k = len(reqs)
        n = self.instance.n
        loc = [0] + reqs + [n + 1]
        ix = np.ix_(loc, loc)
        size = 1 << k
        tt = np.empty((size, k + 2, k + 2))
        ee = np.empty((size, k + 2, k + 2))
        for s in range(size):
            aboard = [reqs[m] for m in range(k) if s >> m & 1]
            w = self.weight(mask_of(aboard))
            if self.corrected is not None:
                tt[s] = self.corrected.time(w)[ix]
                ee[s] = self.corrected.energy(w)[ix]
            else:
                tt[s] = self.leg_times.matrix(w)[ix]
                ee[s] = self.model.arc_energy_array(w, tt[s])
        a = self.a[loc]
        b = self.b[loc]
        found = kernels.order_search(tt, ee, a, b, k, float(self.a[0]), float(self.instance.battery))
        if found is None:
            return None
        return [reqs[m - 1] for m in found]

    def __call__(self, mask: int) -> bool:
        return self.order(mask) is not None


def _pick_checker(instance, tables, model, leg_times, pruning, conditions):
    if pruning not in PRUNING_MODES:
        raise GraphError(f"unknown pruning mode {pruning!r}")
    use_sp = pruning == "shortest-path" or (pruning == "auto" and not conditions.both)
    corrected = CorrectedTables(tables, model, leg_times) if use_sp else None
    return LoadChecker(instance, tables, model, leg_times, corrected, check_route=pruning != "capacity")


def is_load_possible(load: int, instance: Instance, tables: TravelTables, model: EnergyModel,
                     leg_times: Optional[LegTimes] = None,
                     corrected: Optional[CorrectedTables] = None) -> bool:
    """Capacity check, then search for a battery- and window-feasible order."""
    if not load:
        raise GraphError("load must be nonempty")
    return LoadChecker(instance, tables, model, leg_times, corrected)(load)


def enumerate_loads(check, n: int, workers: int = 1) -> List[int]:
    """Level-wise enumeration with superset pruning.

    A candidate of size k+1 is formed from a feasible k-set and a request above
    its highest member, and is only checked when every one of its k-subsets
    was found feasible. Output is sorted by bitmask.
    """
    level = [1 << i for i in range(n)]
    feasible: set = set()
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        while level:
            ok = list(pool.map(check, level)) if pool else [check(m) for m in level]
            level = [m for m, good in zip(level, ok) if good]
            feasible.update(level)
            cands = []
            for s in level:
                for i in range(s.bit_length(), n):
                    c = s | (1 << i)
                    rest = c
                    sound = True
                    while rest:
                        bit = rest & -rest
                        rest ^= bit
                        if bit != 1 << i and (c ^ bit) not in feasible:
                            sound = False
                            break
                    if sound:
                        cands.append(c)
            level = sorted(cands)
    finally:
        if pool:
            pool.shutdown()
    return sorted(feasible)


def find_feasible_loads(instance: Instance, tables: Optional[TravelTables] = None,
                        model: Optional[EnergyModel] = None, leg_times: Optional[LegTimes] = None,
                        pruning: str = "auto", workers: int = 1) -> List[int]:
    tables = tables or travel_tables(instance)
    model = resolve_model(instance, model)
    leg_times = leg_times or LegTimes(tables)
    if instance.n == 0:
        return []
    cond = check_conditions_AB(instance, tables, model, leg_times)
    checker = _pick_checker(instance, tables, model, leg_times, pruning, cond)
    return enumerate_loads(checker, instance.n, workers)


def all_feasible_loads(instance: Instance, tables: TravelTables, model: EnergyModel,
                       leg_times: Optional[LegTimes] = None) -> List[int]:
    """Every nonempty subset passing the load check, without superset pruning."""
    checker = LoadChecker(instance, tables, model, leg_times)
    return [m for m in range(1, 1 << instance.n) if checker(m)]


# ---------------------------------------------------------------------------
# size bounds


def vertex_bound(n: int, upmnr: int) -> int:
    """Worst-case vertex count for ``n`` requests and at most ``upmnr`` per trip."""
    if not 1 <= upmnr <= max(n, 1):
        raise ValueError("need 1 <= upmnr <= n")
    return 2 + n * sum(math.comb(n - 1, i) for i in range(upmnr))


def arc_bound(n: int, upmnr: int) -> int:
    """Worst-case arc count, evaluated term by term as published."""
    if not 1 <= upmnr <= max(n, 1):
        raise ValueError("need 1 <= upmnr <= n")
    s = sum(math.comb(n - 1, i) for i in range(upmnr))
    si = sum(math.comb(n - 1, i) * i for i in range(upmnr))
    return n * s + n * si + n


@dataclass(frozen=True)
class UpmnrResult:
    value: int
    lp_objective: float
    status: str
    naive: int


def naive_upmnr(instance: Instance) -> int:
    if instance.n == 0:
        return 0
    qmin = min(r.demand for r in instance.requests)
    return min(instance.n, int(math.floor(instance.capacity / qmin + 1e-9)))


def horizon(instance: Instance, tmax: float) -> float:
    """Finite stand-in for infinite window ends.

    Every earliest-start schedule of at most ``n`` trips finishes before this
    time: after the last wait (which ends at some window opening) at most
    ``2n`` legs remain.
    """
    opens = [instance.depot_window[0]] + [r.a for r in instance.requests]
    closes = [instance.depot_window[1]] + [r.b for r in instance.requests]
    h = max(opens) + 2 * max(instance.n, 1) * tmax + 1.0
    finite = [c for c in closes if math.isfinite(c)]
    return max([h] + finite)


def compute_upmnr(instance: Instance, tables: Optional[TravelTables] = None,
                  model: Optional[EnergyModel] = None,
                  leg_times: Optional[LegTimes] = None) -> UpmnrResult:
    """Round down the optimum of a linear relaxation of the longest single trip.

    The relaxation lives on the original graph (depot, requests, depot): arc
    variables in [0, 1], time and energy propagation through big-M rows using
    each arc's lightest possible payload (the parcel of its head), and a
    single aggregate capacity row. The result is capped by the naive bound
    ``min(n, floor(Q / min q))`` and is at least 1 unless the relaxation is
    infeasible, in which case it is 0.
    """
    from .solver.lp import LpProblem, SimplexEngine

    tables = tables or travel_tables(instance)
    model = resolve_model(instance, model)
    leg_times = leg_times or LegTimes(tables)
    n = instance.n
    naive = naive_upmnr(instance)
    if n == 0:
        return UpmnrResult(0, math.nan, "empty", 0)
    end = n + 1
    arcs = [(0, j) for j in range(1, n + 1)]
    arcs += [(i, j) for i in range(1, n + 1) for j in range(1, n + 1) if i != j]
    arcs += [(i, end) for i in range(1, n + 1)]
    na = len(arcs)
    ny = n + 2
    yoff, foff = na, na + ny
    use_energy = math.isfinite(instance.battery)
    ncol = na + 2 * ny
    t_arc = [leg_times(i, j, instance.demand(j)) for i, j in arcs]
    H = horizon(instance, max(t_arc))
    win = [tuple(min(v, H) for v in instance.window(k)) for k in range(n + 2)]

    rows, lo, hi = [], [], []

    def add(coefs, l, h):
        row = np.zeros(ncol)
        for j, v in coefs:
            row[j] += v
        rows.append(row)
        lo.append(l)
        hi.append(h)

    ins = {v: [] for v in range(n + 2)}
    outs = {v: [] for v in range(n + 2)}
    for k, (i, j) in enumerate(arcs):
        outs[i].append(k)
        ins[j].append(k)
    for v in range(1, n + 1):
        add([(k, 1.0) for k in ins[v]], -np.inf, 1.0)
        add([(k, 1.0) for k in outs[v]] + [(k, -1.0) for k in ins[v]], 0.0, 0.0)
    add([(k, 1.0) for k in outs[0]], 1.0, 1.0)
    add([(k, 1.0) for k in ins[end]], 1.0, 1.0)
    for k, (i, j) in enumerate(arcs):
        t = t_arc[k]
        big = max(0.0, win[i][1] - win[j][0] + t)
        add([(yoff + i, 1.0), (yoff + j, -1.0), (k, big)], -np.inf, big - t)
        if use_energy:
            e = model.arc_energy(instance.demand(j), t)
            big_e = instance.battery + e
            add([(foff + i, 1.0), (foff + j, -1.0), (k, big_e)], -np.inf, big_e - e)
    add([(k, instance.demand(i)) for k, (i, _) in enumerate(arcs)], -np.inf, instance.capacity)

    c = np.zeros(ncol)
    c[:na] = -1.0
    col_lo = np.zeros(ncol)
    col_hi = np.full(ncol, np.inf)
    col_hi[:na] = 1.0
    for v in range(n + 2):
        col_lo[yoff + v], col_hi[yoff + v] = win[v]
    col_hi[foff] = 0.0
    col_hi[foff + end] = instance.battery if use_energy else np.inf
    prob = LpProblem(c, np.array(rows), np.array(lo), np.array(hi), col_lo, col_hi)
    res = SimplexEngine(prob).solve()
    if not res.optimal:
        return UpmnrResult(0, math.nan, res.status, naive)
    opt = -res.objective - 1.0
    value = int(math.floor(opt + 1e-7))
    return UpmnrResult(max(1, min(value, naive)), opt, "optimal", naive)


# ---------------------------------------------------------------------------
# the graph


@dataclass(frozen=True)
class GenVertex:
    id: int
    kind: str  # "start" | "end" | "delivery"
    r: int
    load: int
    cl: int


@dataclass(frozen=True)
class GenArc:
    id: int
    tail: int
    head: int
    t: float
    c: float
    ed: float
    payload: float


@dataclass
class BuildStats:
    n: int
    n_loads: int
    n_vertices: int
    n_arcs: int
    upmnr: Optional[int] = None
    bound_v: Optional[int] = None
    bound_a: Optional[int] = None
    prep_seconds: float = 0.0
    upmnr_seconds: float = 0.0
    pruning: str = "direct"

    @property
    def ratio_v(self) -> Optional[float]:
        return 100.0 * self.n_vertices / self.bound_v if self.bound_v else None

    @property
    def ratio_a(self) -> Optional[float]:
        return 100.0 * self.n_arcs / self.bound_a if self.bound_a else None

    def line(self) -> str:
        def f(v):
            return "NA" if v is None else str(v)

        return (f"STATS {self.n} {f(self.upmnr)} {self.n_vertices} {self.n_arcs} "
                f"{f(self.bound_v)} {f(self.bound_a)} {self.prep_seconds:.6f}")


@dataclass
class GeneratedGraph:
    n: int
    vertices: List[GenVertex]
    arcs: List[GenArc]
    eh: np.ndarray
    loads: List[int]
    conditions: ConditionReport
    stats: BuildStats
    infeasible_requests: tuple = ()
    load_dependent: bool = False
    in_arcs: List[List[int]] = field(default_factory=list)
    out_arcs: List[List[int]] = field(default_factory=list)
    clusters: Dict[int, List[int]] = field(default_factory=dict)

    def __post_init__(self):
        nv = len(self.vertices)
        self.in_arcs = [[] for _ in range(nv)]
        self.out_arcs = [[] for _ in range(nv)]
        for a in self.arcs:
            self.out_arcs[a.tail].append(a.id)
            self.in_arcs[a.head].append(a.id)
        self.clusters = {k: [] for k in range(self.n + 2)}
        for v in self.vertices:
            self.clusters[v.cl].append(v.id)
        self._by_key = {(v.r, v.load): v.id for v in self.vertices if v.kind == "delivery"}

    @property
    def start(self) -> int:
        return 0

    @property
    def end(self) -> int:
        return len(self.vertices) - 1

    @property
    def delivery(self) -> List[GenVertex]:
        return [v for v in self.vertices if v.kind == "delivery"]

    @property
    def feasible(self) -> bool:
        return not self.infeasible_requests

    def vertex_id(self, r: int, load: int) -> Optional[int]:
        return self._by_key.get((r, load))

    def singleton_vertices(self) -> List[int]:
        return [v.id for v in self.vertices if v.kind == "delivery" and v.load == 1 << (v.r - 1)]

    def structural_issues(self) -> List[str]:
        """Violations of the arc-construction rules (empty when consistent)."""
        issues = []
        dv = self.delivery
        expect = sum(len(members(v.load)) - 1 for v in dv) + len(self.singleton_vertices()) + len(dv)
        # an arc out of (r, L) exists for each p in L\{r} whose vertex survived
        missing = sum(
            1 for v in dv for p in members(v.load) if p != v.r
            and self.vertex_id(p, v.load & ~(1 << (v.r - 1))) is None
        )
        if len(self.arcs) != expect - missing:
            issues.append(f"arc count {len(self.arcs)} != {expect - missing}")
        if sum(len(self.clusters[k]) for k in range(1, self.n + 1)) + 2 != len(self.vertices):
            issues.append("clusters do not partition the vertices")
        for v in dv:
            if v.r not in members(v.load) or v.cl != v.r:
                issues.append(f"vertex {v.id} malformed")
            if not self.in_arcs[v.id] or not self.out_arcs[v.id]:
                issues.append(f"vertex {v.id} lacks an incoming or outgoing arc")
        return issues

    def dumps(self) -> str:
        lines = []
        for v in self.vertices:
            lines.append(f"VERT {v.id} {v.kind} {v.r} {v.load} {v.cl} {self.eh[v.id]:.6f}")
        for a in self.arcs:
            lines.append(f"ARC {a.id} {a.tail} {a.head} {a.t:.6f} {a.c:.6f} {a.ed:.6f} {a.payload:.6f}")
        lines.append(self.stats.line())
        return "\n".join(lines) + "\n"


def build_generated_graph(instance: Instance, tables: Optional[TravelTables] = None,
                          model: Optional[EnergyModel] = None, leg_times: Optional[LegTimes] = None,
                          pruning: str = "auto", with_bounds: bool = True,
                          workers: int = 1) -> GeneratedGraph:
    """Enumerate feasible loads and wire up the vertices and arcs.

    Arcs: start depot to every delivery vertex; ``(r, {r})`` to the end depot;
    ``(r, L)`` to ``(p, L - {r})`` for every surviving vertex of that load.
    Arc times, costs and energies are taken at the payload flown on the arc.
    """
    tables = tables or travel_tables(instance)
    model = resolve_model(instance, model)
    leg_times = leg_times or LegTimes(tables)
    n = instance.n
    t0 = time.perf_counter()
    cond = check_conditions_AB(instance, tables, model, leg_times)
    checker = _pick_checker(instance, tables, model, leg_times, pruning, cond)
    loads = enumerate_loads(checker, n, workers) if n else []

    verts = [GenVertex(0, "start", 0, 0, 0)]
    for L in loads:
        for r in members(L):
            verts.append(GenVertex(len(verts), "delivery", r, L, r))
    verts.append(GenVertex(len(verts), "end", n + 1, 0, n + 1))
    s, e = 0, len(verts) - 1
    key = {(v.r, v.load): v.id for v in verts if v.kind == "delivery"}
    weight = checker.weight

    arcs: List[GenArc] = []

    def add(tail, head, payload):
        i, j = verts[tail].cl, verts[head].cl
        t = leg_times(i, j, payload)
        arcs.append(GenArc(len(arcs), tail, head, t, float(tables.c[i, j]),
                           model.arc_energy(payload, t), payload))

    for v in verts[1:-1]:
        add(s, v.id, weight(v.load))
        rest = v.load & ~(1 << (v.r - 1))
        if not rest:
            add(v.id, e, 0.0)
        else:
            w = weight(rest)
            for p in members(rest):
                head = key.get((p, rest))
                if head is not None:
                    add(v.id, head, w)

    eh = np.zeros(len(verts))
    for v in verts[1:-1]:
        eh[v.id] = model.hover_power(weight(v.load))
    covered = 0
    for L in loads:
        covered |= L
    missing = tuple(r for r in range(1, n + 1) if not covered >> (r - 1) & 1)
    prep = time.perf_counter() - t0
    mode = "capacity" if not checker.check_route else ("shortest-path" if checker.corrected else "direct")
    stats = BuildStats(n, len(loads), len(verts), len(arcs), prep_seconds=prep, pruning=mode)
    if with_bounds and n:
        t1 = time.perf_counter()
        up = compute_upmnr(instance, tables, model, leg_times)
        stats.upmnr_seconds = time.perf_counter() - t1
        stats.upmnr = up.value
        if up.value >= 1:
            stats.bound_v = vertex_bound(n, up.value)
            stats.bound_a = arc_bound(n, up.value)
    return GeneratedGraph(n, verts, arcs, eh, loads, cond, stats, missing, leg_times.load_dependent)
