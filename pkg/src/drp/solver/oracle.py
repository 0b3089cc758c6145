"""Exhaustive reference solver for small instances.

Works directly on trips and routes, never on the generated graph. A trip
flown in a fixed order is summarized by its cost and a finish function
``finish(tau) = max(tau + C, D)`` valid for departures ``a_d <= tau <= LD``.
One drone's options over each request subset are Pareto labels
``(cost, return time)``; drones are then combined over disjoint subsets.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..energy import EnergyModel, load_weight, trip_energy, trip_legs
from ..graphgen import members, resolve_model
from ..instance import Instance, LegTimes, TravelTables, travel_tables
from .lp import LpProblem, solve_lp
from .solution import Solution

MAX_REQUESTS = 8
MAX_HOVER_REQUESTS = 5
EPS = 1e-9


class OracleRefused(ValueError):
    pass


@dataclass(frozen=True)
class TripOption:
    order: Tuple[int, ...]
    cost: float
    C: float
    D: float
    LD: float
    energy: float


@dataclass
class OracleResult:
    status: str  # optimal | infeasible
    objective: float
    solution: Optional[Solution]
    n_trips_enumerated: int = 0


def summarize_trip(order: Sequence[int], instance: Instance, tables: TravelTables,
                   model: EnergyModel, leg: Optional[LegTimes] = None) -> Optional[TripOption]:
    """Cost and finish function of one ordered trip, or ``None`` if infeasible."""
    leg = leg or LegTimes(tables)
    if load_weight(instance, order) > instance.capacity + 1e-9 * max(1.0, instance.capacity):
        return None
    e = trip_energy(model, order, instance, tables, leg)
    if e > instance.battery + 1e-9 * max(1.0, instance.battery) + 1e-9:
        return None
    a_d, b_d = instance.depot_window
    C, D, LD = 0.0, a_d, b_d
    cost = 0.0
    for i, j, _, dt in trip_legs(order, instance, tables, leg):
        cost += instance.routing_weight * float(tables.c[i, j])
        lo, hi = instance.window(j)
        if D + dt > hi + EPS:
            return None
        LD = min(LD, hi - C - dt)
        C += dt
        D = max(D + dt, lo)
    if LD < a_d - EPS:
        return None
    cost += instance.energy_weight * e
    return TripOption(tuple(order), cost, C, D, LD, e)


def _dominates(p: TripOption, q: TripOption) -> bool:
    return p.cost <= q.cost + EPS and p.C <= q.C + EPS and p.D <= q.D + EPS and p.LD >= q.LD - EPS


def enumerate_trips(instance: Instance, tables: TravelTables, model: EnergyModel,
                    leg: Optional[LegTimes] = None) -> Dict[int, List[TripOption]]:
    """Nondominated feasible ordered trips per request subset (bitmask)."""
    n = instance.n
    out: Dict[int, List[TripOption]] = {}
    for mask in range(1, 1 << n):
        reqs = members(mask)
        if load_weight(instance, reqs) > instance.capacity + 1e-9 * max(1.0, instance.capacity):
            continue
        opts: List[TripOption] = []
        for perm in itertools.permutations(reqs):
            o = summarize_trip(perm, instance, tables, model, leg)
            if o is None or any(_dominates(p, o) for p in opts):
                continue
            opts = [p for p in opts if not _dominates(o, p)] + [o]
        if opts:
            out[mask] = opts
    return out


def _prepare(instance, tables, model, limit):
    if instance.n > limit:
        raise OracleRefused(f"brute force is limited to {limit} requests (got {instance.n})")
    tables = tables or travel_tables(instance)
    return tables, resolve_model(instance, model)


def brute_force_solve(instance: Instance, tables: Optional[TravelTables] = None,
                      model: Optional[EnergyModel] = None, leg_times: Optional[LegTimes] = None,
                      hover: bool = False) -> OracleResult:
    """Global optimum by enumeration (hover pricing delegates to :func:`brute_force_hover`)."""
    if hover:
        return brute_force_hover(instance, tables, model, leg_times)
    tables, model = _prepare(instance, tables, model, MAX_REQUESTS)
    n = instance.n
    full = (1 << n) - 1
    trips = enumerate_trips(instance, tables, model, leg_times)
    a_d = instance.depot_window[0]

    # one drone: Pareto labels (cost, ready time) per served subset
    labels: Dict[int, List[tuple]] = {0: [(0.0, a_d, None)]}
    for U in range(0, full + 1):
        lab = labels.get(U)
        if not lab:
            continue
        rest = full & ~U
        sub = rest
        while sub:
            for opt in trips.get(sub, ()):
                for li, (c, ready, _) in enumerate(lab):
                    if ready > opt.LD + EPS:
                        continue
                    nc = c + opt.cost
                    nr = max(ready + opt.C, opt.D)
                    _insert(labels.setdefault(U | sub, []), (nc, nr, (U, li, opt)))
            sub = (sub - 1) & rest
    best = {U: min(lab, key=lambda t: (t[0], t[1])) for U, lab in labels.items() if U and lab}

    # combine up to N drones over disjoint subsets
    INF = math.inf
    N = min(instance.drones, n) if n else 0
    cost = {0: (0.0, ())}
    for _ in range(N):
        nxt = dict(cost)
        for U, (c, parts) in cost.items():
            rest = full & ~U
            if not rest:
                continue
            low = rest & -rest  # canonical: new part holds the lowest free request
            sub = rest
            while sub:
                if sub & low and sub in best:
                    nc = c + best[sub][0]
                    key = U | sub
                    if nc < nxt.get(key, (INF,))[0] - EPS:
                        nxt[key] = (nc, parts + (sub,))
                sub = (sub - 1) & rest
        cost = nxt
    if n == 0:
        return OracleResult("optimal", 0.0, Solution(routes=[], objective=0.0), 0)
    if full not in cost:
        return OracleResult("infeasible", math.nan, None, sum(map(len, trips.values())))
    total, parts = cost[full]
    routes = [_unwind(labels, part, best[part]) for part in parts]
    sol = Solution(routes=routes, objective=total)
    _fill_costs(sol, instance, tables, model, leg_times)
    return OracleResult("optimal", total, sol, sum(map(len, trips.values())))


def _insert(lab: List[tuple], cand: tuple) -> None:
    c, r = cand[0], cand[1]
    for p in lab:
        if p[0] <= c + EPS and p[1] <= r + EPS:
            return
    lab[:] = [p for p in lab if not (c <= p[0] + EPS and r <= p[1] + EPS)] + [cand]


def _unwind(labels, U, label) -> List[List[int]]:
    trips = []
    while label[2] is not None:
        prevU, li, opt = label[2]
        trips.append(list(opt.order))
        label = labels[prevU][li]
    return trips[::-1]


def _fill_costs(sol: Solution, instance, tables, model, leg):
    rw, ew = instance.routing_weight, instance.energy_weight
    for trip in sol.trips:
        for i, j, _, _ in trip_legs(trip, instance, tables, leg):
            sol.transport += rw * float(tables.c[i, j])
        sol.energy += ew * trip_energy(model, trip, instance, tables, leg)


def brute_force_mnr(instance: Instance, tables: Optional[TravelTables] = None,
                    model: Optional[EnergyModel] = None) -> int:
    """Largest number of requests one trip can serve, by trying every ordered trip."""
    tables, model = _prepare(instance, tables, model, MAX_REQUESTS)
    best = 0
    for mask in range(1, 1 << instance.n):
        reqs = members(mask)
        if len(reqs) <= best:
            continue
        if load_weight(instance, reqs) > instance.capacity + 1e-9 * max(1.0, instance.capacity):
            continue  # order cannot help
        if any(summarize_trip(p, instance, tables, model) is not None for p in itertools.permutations(reqs)):
            best = len(reqs)
    return best


# ---------------------------------------------------------------------------
# hover variant


def price_hover_schedule(routes: List[List[List[int]]], instance: Instance, tables: TravelTables,
                         model: EnergyModel, leg: Optional[LegTimes] = None):
    """Cheapest service times for fixed routes when waiting in the air costs energy.

    Returns ``(hover cost, {request: service time})`` or ``None`` if no
    schedule meets windows, chaining and the battery. The first stop of a
    trip never waits in the air: the drone leaves the depot later instead.
    """
    leg = leg or LegTimes(tables)
    ew = instance.energy_weight
    stops = [r for route in routes for trip in route for r in trip]
    col = {r: k for k, r in enumerate(stops)}
    nv = len(stops)
    c = np.zeros(nv)
    rows, lo, hi = [], [], []
    a_d, b_d = instance.depot_window
    const = 0.0
    M = instance.battery

    def row(coefs, l, h):
        v = np.zeros(nv)
        for k, x in coefs:
            v[k] += x
        rows.append(v)
        lo.append(l)
        hi.append(h)

    for route in routes:
        prev_back = None  # (last stop column, return leg time)
        for trip in route:
            legs = list(trip_legs(trip, instance, tables, leg))
            first = col[trip[0]]
            if prev_back is None:
                row([(first, 1.0)], a_d + legs[0][3], math.inf)
            else:
                last, back = prev_back
                row([(first, 1.0), (last, -1.0)], back + legs[0][3], math.inf)
            battery = []
            e_fixed = trip_energy(model, trip, instance, tables, leg)
            for k in range(1, len(trip)):
                i, j, _, dt = legs[k]
                eh = model.hover_power(load_weight(instance, trip[k:]))
                row([(col[j], 1.0), (col[i], -1.0)], dt, math.inf)
                c[col[j]] += ew * eh
                c[col[i]] -= ew * eh
                const -= ew * eh * dt
                battery.append((col[j], eh, col[i], dt))
            if math.isfinite(M) and battery:
                coefs, shift = [], 0.0
                for cj, eh, ci, dt in battery:
                    coefs += [(cj, eh), (ci, -eh)]
                    shift += eh * dt
                row(coefs, -math.inf, M - e_fixed + shift)
            back = legs[-1][3]
            row([(col[trip[-1]], 1.0)], -math.inf, b_d - back)
            prev_back = (col[trip[-1]], back)
    col_lo = np.array([instance.window(r)[0] for r in stops], dtype=float)
    col_hi = np.array([instance.window(r)[1] for r in stops], dtype=float)
    A = np.array(rows) if rows else np.zeros((0, nv))
    res = solve_lp(LpProblem(c, A, np.array(lo), np.array(hi), col_lo, col_hi, const))
    if not res.optimal:
        return None
    return max(0.0, res.objective), {r: float(res.x[col[r]]) for r in stops}


def _ordered_partitions(items: List[int]):
    """Every way to split ``items`` into an ordered list of nonempty ordered blocks."""
    n = len(items)
    if n == 0:
        yield []
        return
    for perm in itertools.permutations(items):
        for cuts in itertools.product((0, 1), repeat=n - 1):
            blocks, cur = [], [perm[0]]
            for k in range(1, n):
                if cuts[k - 1]:
                    blocks.append(cur)
                    cur = []
                cur.append(perm[k])
            blocks.append(cur)
            yield blocks


def brute_force_hover(instance: Instance, tables: Optional[TravelTables] = None,
                      model: Optional[EnergyModel] = None,
                      leg_times: Optional[LegTimes] = None) -> OracleResult:
    """Enumerate every solution structure and price its waits with a small LP."""
    tables, model = _prepare(instance, tables, model, MAX_HOVER_REQUESTS)
    n = instance.n
    fixed: Dict[tuple, Optional[float]] = {}
    best: Optional[tuple] = None
    seen = set()
    count = 0
    for trips in _ordered_partitions(list(range(1, n + 1))):
        costs = []
        for t in trips:
            key = tuple(t)
            if key not in fixed:
                o = summarize_trip(t, instance, tables, model, leg_times)
                fixed[key] = None if o is None else o.cost
            costs.append(fixed[key])
        if any(c is None for c in costs):
            continue
        base = sum(costs)
        if best is not None and base >= best[0] - EPS:
            continue
        m = len(trips)
        for cuts in itertools.product((0, 1), repeat=m - 1):
            routes, cur = [], [trips[0]]
            for k in range(1, m):
                if cuts[k - 1]:
                    routes.append(cur)
                    cur = []
                cur.append(trips[k])
            routes.append(cur)
            if len(routes) > instance.drones:
                continue
            canon = tuple(sorted(tuple(map(tuple, r)) for r in routes))
            if canon in seen:
                continue
            seen.add(canon)
            count += 1
            priced = price_hover_schedule(routes, instance, tables, model, leg_times)
            if priced is None:
                continue
            total = base + priced[0]
            if best is None or total < best[0] - EPS:
                best = (total, routes, priced)
    if best is None:
        return OracleResult("infeasible", math.nan, None, count)
    total, routes, (hcost, y) = best
    sol = Solution(routes=[[list(t) for t in r] for r in routes], objective=total, hover=hcost, y=y)
    _fill_costs(sol, instance, tables, model, leg_times)
    return OracleResult("optimal", total, sol, count)
