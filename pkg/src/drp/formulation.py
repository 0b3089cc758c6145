"""Mixed-integer linear model over the load-indexed graph.

Variables:

* ``x[a]``   binary, arc ``a`` is flown
* ``z[i,j]`` binary, the trip ending at request ``i`` is followed (same drone)
  by the trip starting at request ``j``
* ``y[i]``   service start at cluster ``i`` (0 start depot, n+1 end depot)
* ``f[i]``   energy used by the visiting drone's current trip on arrival at ``i``

Arc energies are constants of the graph, so every row is linear whatever
energy model produced them. Optional parts: arrival-time variables that price
hovering before a window opens, per-arc (load-dependent) flight times with
vertex-level trip chaining, and a set of valid inequalities.

Infinite window ends are replaced by a finite horizon (see
:func:`drp.graphgen.horizon`) so every big-M constant is finite.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

import numpy as np

from .graphgen import GeneratedGraph, floyd_warshall, horizon, members
from .instance import Instance, TravelTables, travel_tables

BINARY, INTEGER, CONTINUOUS = "binary", "integer", "continuous"
SENSES = ("<=", ">=", "=")


class FormulationError(ValueError):
    pass


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str
    lb: float
    ub: float


@dataclass(frozen=True)
class Constraint:
    name: str
    coefs: Tuple[Tuple[int, float], ...]
    sense: str
    rhs: float
    group: str = ""


@dataclass(frozen=True)
class MilpModel:
    """Solver-agnostic minimization model with named, role-tagged variables."""

    name: str
    variables: Tuple[Variable, ...]
    constraints: Tuple[Constraint, ...]
    objective: Tuple[Tuple[int, float], ...]
    obj_const: float = 0.0
    roles: Mapping[tuple, int] = field(default_factory=dict)
    meta: Mapping[str, object] = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_cons(self) -> int:
        return len(self.constraints)

    def index(self, name: str) -> int:
        idx = self._names().get(name)
        if idx is None:
            raise KeyError(name)
        return idx

    def _names(self) -> Dict[str, int]:
        cache = self.__dict__.get("_name_cache")
        if cache is None:
            cache = {v.name: k for k, v in enumerate(self.variables)}
            object.__setattr__(self, "_name_cache", cache)
        return cache

    def role(self, *key) -> int:
        return self.roles[tuple(key)]

    def roles_of(self, kind: str) -> Dict[tuple, int]:
        return {k: v for k, v in self.roles.items() if k[0] == kind}

    def integer_indices(self) -> List[int]:
        return [k for k, v in enumerate(self.variables) if v.kind != CONTINUOUS]

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for j, v in self.objective:
            c[j] += v
        return c

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.objective_vector() @ x) + self.obj_const

    def dense(self):
        """``(c, A, row_lo, row_hi, col_lo, col_hi)`` as numpy arrays."""
        m, n = self.n_cons, self.n_vars
        A = np.zeros((m, n))
        lo = np.full(m, -np.inf)
        hi = np.full(m, np.inf)
        for i, con in enumerate(self.constraints):
            for j, v in con.coefs:
                A[i, j] += v
            if con.sense in ("<=", "="):
                hi[i] = con.rhs
            if con.sense in (">=", "="):
                lo[i] = con.rhs
        col_lo = np.array([v.lb for v in self.variables], dtype=float)
        col_hi = np.array([v.ub for v in self.variables], dtype=float)
        return self.objective_vector(), A, lo, hi, col_lo, col_hi

    def violations(self, x: np.ndarray, tol: float = 1e-6) -> List[str]:
        """Rows, bounds and integrality broken by ``x``."""
        out = []
        for k, v in enumerate(self.variables):
            if x[k] < v.lb - tol or x[k] > v.ub + tol:
                out.append(f"bound {v.name}={x[k]:g} not in [{v.lb:g}, {v.ub:g}]")
            if v.kind != CONTINUOUS and abs(x[k] - round(x[k])) > tol:
                out.append(f"integrality {v.name}={x[k]:g}")
        for con in self.constraints:
            lhs = sum(c * x[j] for j, c in con.coefs)
            scale = tol * max(1.0, abs(con.rhs))
            if (con.sense == "<=" and lhs > con.rhs + scale) or (
                con.sense == ">=" and lhs < con.rhs - scale) or (
                con.sense == "=" and abs(lhs - con.rhs) > scale):
                out.append(f"row {con.name}: {lhs:g} {con.sense} {con.rhs:g}")
        return out

    def is_linear(self) -> bool:
        """Every row and the objective are sums of constant times single variable."""
        ok = all(isinstance(j, int) and math.isfinite(c) for con in self.constraints for j, c in con.coefs)
        return ok and all(math.isfinite(c) for _, c in self.objective)

    def builder(self) -> "ModelBuilder":
        b = ModelBuilder(self.name)
        inv = {v: k for k, v in self.roles.items()}
        for k, v in enumerate(self.variables):
            b.add_var(v.name, v.kind, v.lb, v.ub, role=inv.get(k))
        for con in self.constraints:
            b.add_con(con.name, {self.variables[j].name: c for j, c in con.coefs}, con.sense, con.rhs, con.group)
        b.objective = defaultdict(float, {self.variables[j].name: c for j, c in self.objective})
        b.obj_const = self.obj_const
        b.meta = dict(self.meta)
        return b


class ModelBuilder:
    """Name-keyed staging area; :meth:`build` freezes it into a :class:`MilpModel`."""

    def __init__(self, name: str = "drp"):
        self.name = name
        self.vars: Dict[str, Variable] = {}
        self.var_roles: Dict[str, tuple] = {}
        self.cons: List[tuple] = []
        self.objective: Dict[str, float] = defaultdict(float)
        self.obj_const = 0.0
        self.meta: Dict[str, object] = {}

    def add_var(self, name: str, kind: str = CONTINUOUS, lb: float = 0.0, ub: float = math.inf,
                role: Optional[tuple] = None) -> str:
        if name in self.vars:
            raise FormulationError(f"duplicate variable {name}")
        if kind == BINARY:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        self.vars[name] = Variable(name, kind, float(lb), float(ub))
        if role is not None:
            self.var_roles[name] = role
        return name

    def add_con(self, name: str, coefs: Mapping[str, float], sense: str, rhs: float, group: str = ""):
        if sense not in SENSES:
            raise FormulationError(f"bad sense {sense!r}")
        for v in coefs:
            if v not in self.vars:
                raise FormulationError(f"row {name} uses undeclared variable {v}")
        if not math.isfinite(rhs):
            raise FormulationError(f"row {name} has non-finite right-hand side")
        self.cons.append((name, dict(coefs), sense, float(rhs), group))

    def drop_group(self, group: str) -> None:
        self.cons = [c for c in self.cons if c[4] != group]

    def drop_vars(self, names: Iterable[str]) -> None:
        names = set(names)
        for nm in names:
            self.vars.pop(nm, None)
            self.var_roles.pop(nm, None)
            self.objective.pop(nm, None)
        for c in self.cons:
            if names & c[1].keys():
                raise FormulationError(f"row {c[0]} still uses a dropped variable")

    def build(self) -> MilpModel:
        names = list(self.vars)
        idx = {nm: k for k, nm in enumerate(names)}
        cons = tuple(
            Constraint(nm, tuple((idx[v], c) for v, c in coefs.items() if c != 0.0), sense, rhs, group)
            for nm, coefs, sense, rhs, group in self.cons
        )
        obj = tuple((idx[v], c) for v, c in self.objective.items() if c != 0.0)
        roles = {role: idx[nm] for nm, role in self.var_roles.items()}
        return MilpModel(self.name, tuple(self.vars[nm] for nm in names), cons, obj,
                         self.obj_const, roles, dict(self.meta))


# ---------------------------------------------------------------------------
# data shared by the builders


@dataclass(frozen=True)
class FormulationOptions:
    covering: str = "cluster"  # or "superset"
    hover: bool = False
    load_dependent: bool = False
    cuts: bool = False
    time_pairs: str = "arc"  # or "all"


@dataclass(frozen=True)
class BigMSet:
    M4: Tuple[float, ...]
    M5: Mapping[Tuple[int, int], float]
    M6: Mapping[Tuple[int, int], float]
    M7: float
    horizon: float


class _Context:
    def __init__(self, graph: GeneratedGraph, instance: Instance, tables: Optional[TravelTables]):
        if not graph.feasible:
            raise FormulationError(f"requests {list(graph.infeasible_requests)} fit in no feasible load")
        if graph.n == 0 or len(graph.arcs) == 0:
            raise FormulationError("empty graph")
        self.g = graph
        self.inst = instance
        self.tables = tables or travel_tables(instance)
        self.n = instance.n
        self.end = instance.n + 1
        tmax = max([a.t for a in graph.arcs] + [float(self.tables.t.max())])
        self.tmax = tmax
        self.H = horizon(instance, tmax)
        self.win = [tuple(min(v, self.H) for v in instance.window(k)) for k in range(self.n + 2)]

    def t(self, i: int, j: int) -> float:
        return float(self.tables.t[i, j])

    def cl(self, v: int) -> int:
        return self.g.vertices[v].cl


def compute_big_m(graph: GeneratedGraph, instance: Instance,
                  tables: Optional[TravelTables] = None) -> BigMSet:
    ctx = _Context(graph, instance, tables)
    return _big_m(ctx)


def _big_m(ctx: _Context) -> BigMSet:
    M = ctx.inst.battery
    m4 = tuple(M + a.ed for a in ctx.g.arcs)
    m5, m6 = {}, {}
    rng = range(ctx.n + 2)
    for i in rng:
        for j in rng:
            if i == j:
                continue
            m5[i, j] = max(0.0, ctx.win[i][1] - ctx.win[j][0] + ctx.t(i, j))
            if 1 <= i <= ctx.n and 1 <= j <= ctx.n:
                m6[i, j] = max(0.0, ctx.win[i][1] - ctx.win[j][0] + ctx.t(i, ctx.end) + ctx.t(0, j))
    m7 = max(w[1] for w in ctx.win) + ctx.tmax
    return BigMSet(m4, m5, m6, m7, ctx.H)


def big_m5(b_i: float, a_j: float, t_ij: float) -> float:
    return max(0.0, b_i - a_j + t_ij)


def big_m6(b_i: float, a_j: float, t_i_end: float, t_start_j: float) -> float:
    return max(0.0, b_i - a_j + t_i_end + t_start_j)


def _x(a: int) -> str:
    return f"x{a}"


def _y(i: int) -> str:
    return f"y{i}"


def _f(i: int) -> str:
    return f"f{i}"


def _z(i: int, j: int) -> str:
    return f"z{i}_{j}"


# ---------------------------------------------------------------------------
# core model


def build_core_milp(graph: GeneratedGraph, instance: Instance,
                    options: FormulationOptions = FormulationOptions(),
                    tables: Optional[TravelTables] = None) -> MilpModel:
    """Routing model with covering, flow, energy, time and trip-chaining rows."""
    if options.covering not in ("cluster", "superset"):
        raise FormulationError(f"unknown covering variant {options.covering!r}")
    if options.time_pairs not in ("arc", "all"):
        raise FormulationError(f"unknown time_pairs {options.time_pairs!r}")
    ctx = _Context(graph, instance, tables)
    g, n, end = graph, ctx.n, ctx.end
    bm = _big_m(ctx)
    b = ModelBuilder(f"drp-{instance.objective}")
    s, e = g.start, g.end

    for a in g.arcs:
        b.add_var(_x(a.id), BINARY, role=("x", a.id))
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i != j:
                b.add_var(_z(i, j), BINARY, role=("z", i, j))
    for i in range(n + 2):
        lo, hi = ctx.win[i]
        b.add_var(_y(i), CONTINUOUS, max(lo, 0.0), hi, role=("y", i))
    for i in range(n + 2):
        hi = 0.0 if i == 0 else (instance.battery if i == end else math.inf)
        b.add_var(_f(i), CONTINUOUS, 0.0, hi, role=("f", i))

    rw, ew = instance.routing_weight, instance.energy_weight
    for a in g.arcs:
        b.objective[_x(a.id)] += rw * a.c + ew * a.ed

    # covering
    if options.covering == "cluster":
        for r in range(1, n + 1):
            coefs = {_x(a): 1.0 for v in g.clusters[r] for a in g.in_arcs[v]}
            b.add_con(f"cover{r}", coefs, "=", 1.0, "cover")
    else:
        for r in range(1, n + 1):
            bit = 1 << (r - 1)
            coefs = {_x(a): 1.0 for a in g.out_arcs[s] if g.vertices[g.arcs[a].head].load & bit}
            b.add_con(f"cover{r}", coefs, "=", 1.0, "cover")
    # flow conservation
    for v in g.delivery:
        coefs = {_x(a): 1.0 for a in g.in_arcs[v.id]}
        for a in g.out_arcs[v.id]:
            coefs[_x(a)] = coefs.get(_x(a), 0.0) - 1.0
        b.add_con(f"flow{v.id}", coefs, "=", 0.0, "flow")
    coefs = {_x(a): 1.0 for a in g.out_arcs[s]}
    for a in g.in_arcs[e]:
        coefs[_x(a)] = coefs.get(_x(a), 0.0) - 1.0
    b.add_con("depots", coefs, "=", 0.0, "depots")
    # energy propagation
    if math.isfinite(instance.battery):
        for a in g.arcs:
            i, j = ctx.cl(a.tail), ctx.cl(a.head)
            m4 = bm.M4[a.id]
            b.add_con(f"energy{a.id}", {_f(j): 1.0, _f(i): -1.0, _x(a.id): -m4}, ">=", a.ed - m4, "energy")
    # service-time propagation between clusters
    pair_arcs: Dict[Tuple[int, int], List[int]] = defaultdict(list)
    for a in g.arcs:
        pair_arcs[ctx.cl(a.tail), ctx.cl(a.head)].append(a.id)
    if options.time_pairs == "all":
        pairs = [(i, j) for i in range(0, n + 1) for j in range(1, n + 2) if i != j and (i, j) != (0, end)]
    else:
        pairs = sorted(pair_arcs)
    for i, j in pairs:
        m5 = bm.M5[i, j]
        coefs = {_y(i): 1.0, _y(j): -1.0}
        for a in pair_arcs.get((i, j), []):
            coefs[_x(a)] = m5
        b.add_con(f"time{i}_{j}", coefs, "<=", m5 - ctx.t(i, j), "time")
    _add_core_chaining(b, ctx, bm)
    total_q = sum(r.demand for r in instance.requests)
    b.add_con("mintrips", {_x(a): 1.0 for a in g.out_arcs[s]}, ">=", total_q / instance.capacity, "mintrips")

    b.meta.update(
        n=n, horizon=ctx.H, tmax=ctx.tmax, options=options, objective_setting=instance.objective,
        hover=False, load_dependent=False, cuts=False,
    )
    return b.build()


def _add_core_chaining(b: ModelBuilder, ctx: _Context, bm: BigMSet) -> None:
    g, n, end = ctx.g, ctx.n, ctx.end
    s, e = g.start, g.end
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i == j:
                continue
            m6 = bm.M6[i, j]
            rhs = m6 - ctx.t(i, end) - ctx.t(0, j)
            b.add_con(f"chain{i}_{j}", {_y(i): 1.0, _y(j): -1.0, _z(i, j): m6}, "<=", rhs, "chain")
    for j in range(1, n + 1):
        coefs = {_z(i, j): 1.0 for i in range(1, n + 1) if i != j}
        for a in g.out_arcs[s]:
            if ctx.cl(g.arcs[a].head) == j:
                coefs[_x(a)] = -1.0
        b.add_con(f"zin{j}", coefs, "<=", 0.0, "zin")
    for i in range(1, n + 1):
        coefs = {_z(i, j): 1.0 for j in range(1, n + 1) if i != j}
        for a in g.in_arcs[e]:
            if ctx.cl(g.arcs[a].tail) == i:
                coefs[_x(a)] = -1.0
        b.add_con(f"zout{i}", coefs, "<=", 0.0, "zout")
    coefs = {_x(a): 1.0 for a in g.out_arcs[s]}
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i != j:
                coefs[_z(i, j)] = -1.0
    b.add_con("fleet", coefs, "<=", float(ctx.inst.drones), "fleet")


# ---------------------------------------------------------------------------
# extensions


def apply_hover_extension(model: MilpModel, graph: GeneratedGraph, instance: Instance,
                          tables: Optional[TravelTables] = None) -> MilpModel:
    """Price waiting before service with the per-vertex hover power.

    Adds an arrival time ``r[v]`` per delivery vertex bounded by the departure
    from the predecessor plus the arc time, charges ``eh[v] * (y - r)`` in both
    the objective and the battery rows, and ties ``r[v]`` to ``y`` at vertices
    the solution does not visit so their hover term vanishes. The first stop
    of a trip never hovers: the drone can leave the depot later instead.
    """
    ctx = _Context(graph, instance, tables)
    if model.meta.get("hover"):
        raise FormulationError("hover extension already applied")
    g = graph
    b = model.builder()
    bm = _big_m(ctx)
    H = ctx.H
    ew = instance.energy_weight
    for v in g.delivery:
        b.add_var(f"r{v.id}", CONTINUOUS, 0.0, ctx.win[v.cl][1], role=("r", v.id))
        eh = float(g.eh[v.id])
        if eh and ew:
            b.objective[_y(v.cl)] += ew * eh
            b.objective[f"r{v.id}"] -= ew * eh
    for a in g.arcs:
        if a.tail == g.start or a.head == g.end:
            continue
        w, v = a.tail, a.head
        b.add_con(f"arrive{a.id}", {f"r{v}": 1.0, _y(ctx.cl(w)): -1.0, _x(a.id): bm.M7},
                  "<=", a.t + bm.M7, "arrive")
    if math.isfinite(instance.battery):
        b.drop_group("energy")
        for a in g.arcs:
            i, j = ctx.cl(a.tail), ctx.cl(a.head)
            eh = float(g.eh[a.head])
            big = instance.battery + a.ed + eh * H
            coefs = {_f(j): 1.0, _f(i): -1.0, _x(a.id): -big}
            if eh:
                coefs[_y(j)] = -eh
                coefs[f"r{a.head}"] = eh
            b.add_con(f"energy{a.id}", coefs, ">=", a.ed - big, "energy")
    for v in g.delivery:
        b.add_con(f"nowait{v.id}", {f"r{v.id}": 1.0, _y(v.cl): -1.0}, "<=", 0.0, "hover-pin")
        coefs = {f"r{v.id}": 1.0, _y(v.cl): -1.0}
        for a in g.in_arcs[v.id]:
            coefs[_x(a)] = H
        b.add_con(f"pin{v.id}", coefs, ">=", 0.0, "hover-pin")
    b.meta["hover"] = True
    return b.build()


def apply_load_dependent_extension(model: MilpModel, graph: GeneratedGraph, instance: Instance,
                                   tables: Optional[TravelTables] = None) -> MilpModel:
    """Switch time propagation to per-arc times and chain trips vertex to vertex.

    ``z[v,w]`` links a trip ending at singleton vertex ``v`` to one starting at
    vertex ``w`` of another cluster; the cluster-level chaining rows and
    variables are removed.
    """
    ctx = _Context(graph, instance, tables)
    if model.meta.get("load_dependent"):
        raise FormulationError("load-dependent extension already applied")
    if model.meta.get("cuts"):
        raise FormulationError("apply the load-dependent extension before the valid inequalities")
    g, n = graph, ctx.n
    s, e = g.start, g.end
    b = model.builder()
    for grp in ("time", "chain", "zin", "zout", "fleet"):
        b.drop_group(grp)
    b.drop_vars([_z(i, j) for i in range(1, n + 1) for j in range(1, n + 1) if i != j])
    win = ctx.win
    for a in g.arcs:
        i, j = ctx.cl(a.tail), ctx.cl(a.head)
        m8 = big_m5(win[i][1], win[j][0], a.t)
        b.add_con(f"time{a.id}", {_y(i): 1.0, _y(j): -1.0, _x(a.id): m8}, "<=", m8 - a.t, "time")
    to_end = {g.arcs[a].tail: g.arcs[a] for a in g.in_arcs[e]}
    from_start = {g.arcs[a].head: g.arcs[a] for a in g.out_arcs[s]}
    singles = g.singleton_vertices()
    zin: Dict[int, Dict[str, float]] = defaultdict(dict)
    fleet = {_x(a): 1.0 for a in g.out_arcs[s]}
    for v in singles:
        cv = ctx.cl(v)
        back = to_end[v]
        zout = {}
        for w in g.delivery:
            if w.cl == cv:
                continue
            out = from_start[w.id]
            name = f"z{v}_{w.id}"
            b.add_var(name, BINARY, role=("zv", v, w.id))
            m9 = big_m6(win[cv][1], win[w.cl][0], back.t, out.t)
            b.add_con(f"chain{v}_{w.id}", {_y(cv): 1.0, _y(w.cl): -1.0, name: m9},
                      "<=", m9 - back.t - out.t, "chain")
            zin[w.id][name] = 1.0
            zout[name] = 1.0
            fleet[name] = -1.0
        zout[_x(back.id)] = -1.0
        b.add_con(f"zout{v}", zout, "<=", 0.0, "zout")
    for w in g.delivery:
        coefs = dict(zin.get(w.id, {}))
        coefs[_x(from_start[w.id].id)] = -1.0
        b.add_con(f"zin{w.id}", coefs, "<=", 0.0, "zin")
    b.add_con("fleet", fleet, "<=", float(instance.drones), "fleet")
    b.meta["load_dependent"] = True
    return b.build()


def min_return_energy(graph: GeneratedGraph, instance: Instance, tables: TravelTables,
                      model=None) -> np.ndarray:
    """Lower bound on the energy still needed to get home from each cluster.

    Uses the cheapest arc into the end depot when the metric and monotone
    conditions hold. Otherwise a shortest path where every leg is priced at
    its cheapest payload among the feasible load weights.
    """
    n, end = instance.n, instance.n + 1
    out = np.zeros(n + 2)
    direct = {}
    for a in graph.in_arcs[graph.end]:
        c = graph.vertices[graph.arcs[a].tail].cl
        direct[c] = min(direct.get(c, math.inf), graph.arcs[a].ed)
    if graph.conditions.both or model is None:
        for j in range(1, n + 1):
            out[j] = direct.get(j, 0.0)
        return out
    from .energy import load_weight

    weights = sorted({0.0} | {load_weight(instance, members(L)) for L in graph.loads})
    cheapest = np.min([model.arc_energy_array(w, tables.t) for w in weights], axis=0)
    sp = floyd_warshall(cheapest)
    for j in range(1, n + 1):
        out[j] = min(sp[j, end], direct.get(j, math.inf))
    return out


def add_valid_inequalities(model: MilpModel, graph: GeneratedGraph, instance: Instance,
                           tables: Optional[TravelTables] = None, energy_model=None) -> MilpModel:
    """Service-time and energy bounds, ordering variables and a trip counter."""
    ctx = _Context(graph, instance, tables)
    if model.meta.get("load_dependent"):
        raise FormulationError("valid inequalities need the cluster-level trip variables")
    if model.meta.get("cuts"):
        raise FormulationError("valid inequalities already added")
    g, n, end = graph, ctx.n, ctx.end
    s = g.start
    b = model.builder()
    into: Dict[int, List[int]] = defaultdict(list)
    pair_arcs: Dict[Tuple[int, int], List[int]] = defaultdict(list)
    for a in g.arcs:
        i, j = ctx.cl(a.tail), ctx.cl(a.head)
        if 1 <= j <= n:
            into[j].append(a.id)
        if 1 <= i <= n and 1 <= j <= n:
            pair_arcs[i, j].append(a.id)
    for j in range(1, n + 1):
        coefs = {_y(j): 1.0}
        for a in into[j]:
            coefs[_x(a)] = coefs.get(_x(a), 0.0) - ctx.t(ctx.cl(g.arcs[a].tail), j)
        b.add_con(f"ylb{j}", coefs, ">=", 0.0, "cut-time")
        coefs = {_y(j): 1.0}
        for i in range(1, n + 1):
            if i != j:
                coefs[_z(i, j)] = -(ctx.t(i, end) + ctx.t(0, j))
        b.add_con(f"ychain{j}", coefs, ">=", 0.0, "cut-chain")
        coefs = {_f(j): 1.0}
        for a in into[j]:
            coefs[_x(a)] = coefs.get(_x(a), 0.0) - g.arcs[a].ed
        b.add_con(f"flb{j}", coefs, ">=", 0.0, "cut-energy")
    if math.isfinite(instance.battery):
        back = min_return_energy(graph, instance, ctx.tables, energy_model)
        for j in range(1, n + 1):
            b.add_con(f"fub{j}", {_f(j): 1.0}, "<=", instance.battery - back[j], "cut-energy")
    for i in range(1, n + 1):
        b.add_var(f"u{i}", CONTINUOUS, 0.0, float(n), role=("u", i))
    for (i, j), arcs in sorted(pair_arcs.items()):
        coefs = {f"u{j}": 1.0, f"u{i}": -1.0}
        for a in arcs:
            coefs[_x(a)] = -float(n)
        b.add_con(f"mtz{i}_{j}", coefs, ">=", 1.0 - n, "cut-mtz")
    b.add_var("nu", INTEGER, 0.0, float(n), role=("nu",))
    coefs = {"nu": 1.0}
    for a in g.out_arcs[s]:
        coefs[_x(a)] = -1.0
    b.add_con("trips", coefs, "=", 0.0, "cut-trips")
    b.meta["cuts"] = True
    return b.build()


def build_model(graph: GeneratedGraph, instance: Instance,
                options: FormulationOptions = FormulationOptions(),
                tables: Optional[TravelTables] = None, energy_model=None) -> MilpModel:
    """Core model plus whichever extensions ``options`` asks for."""
    if options.load_dependent and options.cuts:
        raise FormulationError("valid inequalities are defined for the cluster-level model only")
    tables = tables or travel_tables(instance)
    model = build_core_milp(graph, instance, options, tables)
    if options.load_dependent:
        model = apply_load_dependent_extension(model, graph, instance, tables)
    if options.hover:
        model = apply_hover_extension(model, graph, instance, tables)
    if options.cuts:
        model = add_valid_inequalities(model, graph, instance, tables, energy_model)
    return model
