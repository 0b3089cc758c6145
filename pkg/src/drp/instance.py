"""Problem instances: data model, random generation, text codec and travel tables.

Location indices follow the cluster convention used everywhere in the package:
0 is the start depot, 1..n are the requests and n+1 is the end depot. Both
depots share one physical location.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

FORMAT_VERSION = 1
OBJECTIVE_SETTINGS = ("R", "E", "RE")


class InstanceError(ValueError):
    """Invalid instance data or generator configuration."""


class ParseError(InstanceError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Request:
    id: int
    x: float
    y: float
    demand: float
    a: float
    b: float


@dataclass(frozen=True)
class EnergySpec:
    """Energy model selection as stored in an instance file.

    ``params`` holds floats for ``linear`` (slope, base) and ``convex``
    (alpha, beta); for ``phase`` it holds the coefficient table path.
    """

    kind: str
    params: tuple


@dataclass(frozen=True)
class Instance:
    requests: tuple
    depot: tuple = (0.0, 0.0)
    depot_window: tuple = (0.0, math.inf)
    drones: int = 1
    capacity: float = 1.0
    battery: float = math.inf
    speed: float = 1.0
    cost_per_distance: float = 1.0
    energy_cost: float = 1.0
    objective: str = "RE"
    time_overrides: tuple = ()
    cost_overrides: tuple = ()
    energy: Optional[EnergySpec] = None

    def __post_init__(self):
        object.__setattr__(self, "requests", tuple(self.requests))
        object.__setattr__(self, "depot", tuple(float(v) for v in self.depot))
        object.__setattr__(self, "depot_window", tuple(float(v) for v in self.depot_window))
        object.__setattr__(self, "time_overrides", tuple(sorted(self.time_overrides)))
        object.__setattr__(self, "cost_overrides", tuple(sorted(self.cost_overrides)))
        self.check()

    @property
    def n(self) -> int:
        return len(self.requests)

    @property
    def end(self) -> int:
        """Cluster index of the end depot."""
        return self.n + 1

    def check(self) -> None:
        if self.drones < 1:
            raise InstanceError("drone count must be at least 1")
        if not self.capacity > 0:
            raise InstanceError("capacity must be positive")
        if not self.battery > 0:
            raise InstanceError("battery must be positive")
        if self.depot_window[0] > self.depot_window[1]:
            raise InstanceError("depot window is empty")
        if self.objective not in OBJECTIVE_SETTINGS:
            raise InstanceError(f"unknown objective setting {self.objective!r}")
        for k, r in enumerate(self.requests, start=1):
            if r.id != k:
                raise InstanceError(f"request ids must be 1..n in order, got {r.id} at position {k}")
            if not r.demand > 0:
                raise InstanceError(f"request {r.id}: demand must be positive")
            if r.a > r.b:
                raise InstanceError(f"request {r.id}: window [{r.a}, {r.b}] is empty")
        last = self.n + 1
        for (i, j), _ in self.time_overrides + self.cost_overrides:
            if not (0 <= i <= last and 0 <= j <= last):
                raise InstanceError(f"override index ({i}, {j}) out of range")

    def window(self, k: int) -> tuple:
        """Time window of cluster ``k``; both depots use the depot window."""
        if k == 0 or k == self.n + 1:
            return self.depot_window
        r = self.requests[k - 1]
        return (r.a, r.b)

    def demand(self, k: int) -> float:
        if k == 0 or k == self.n + 1:
            return 0.0
        return self.requests[k - 1].demand

    def location(self, k: int) -> tuple:
        if k == 0 or k == self.n + 1:
            return self.depot
        r = self.requests[k - 1]
        return (r.x, r.y)

    def with_objective(self, setting: str) -> "Instance":
        return replace(self, objective=setting)

    @property
    def routing_weight(self) -> float:
        """Multiplier applied to arc costs in the objective (0 under setting E)."""
        return 0.0 if self.objective == "E" else 1.0

    @property
    def energy_weight(self) -> float:
        """Multiplier applied to consumed energy in the objective (0 under setting R)."""
        return 0.0 if self.objective == "R" else self.energy_cost


# ---------------------------------------------------------------------------
# generation


@dataclass(frozen=True)
class GeneratorConfig:
    n: int
    area_size: float = 100.0
    depot_style: str = "corner"
    window_style: str = "open"
    demand_range: tuple = (0.1, 1.0)
    drones: int = 2
    capacity: float = 2.0
    battery: float = math.inf
    speed: float = 1.0
    cost_per_distance: float = 1.0
    energy_cost: float = 1.0
    horizon: float = 1000.0
    window_width: float = 0.25
    objective: str = "RE"
    energy: Optional[EnergySpec] = None


def generate_instance(config: GeneratorConfig, seed: int) -> Instance:
    """Draw a random instance; a pure function of ``(config, seed)``.

    Requests are placed uniformly in the square ``[0, area_size]^2``. The depot
    sits at the origin for ``corner`` and at the centre for ``center``.
    ``window_style`` is ``open`` (every request inherits the depot window) or
    ``random`` (a window of ``window_width * horizon`` minutes whose opening is
    uniform over the first half of the horizon).
    """
    if config.n < 1:
        raise InstanceError("n must be at least 1")
    if not config.area_size > 0:
        raise InstanceError("area_size must be positive")
    lo, hi = config.demand_range
    if not (0 < lo <= hi):
        raise InstanceError("demand_range must be a nonempty positive interval")
    if config.depot_style not in ("corner", "center"):
        raise InstanceError(f"unknown depot_style {config.depot_style!r}")
    if config.window_style not in ("open", "random"):
        raise InstanceError(f"unknown window_style {config.window_style!r}")

    rng = random.Random(seed)
    size = config.area_size
    depot = (0.0, 0.0) if config.depot_style == "corner" else (size / 2, size / 2)
    horizon = config.horizon
    width = config.window_width * horizon
    requests = []
    for k in range(1, config.n + 1):
        x = round(rng.uniform(0, size), 3)
        y = round(rng.uniform(0, size), 3)
        q = round(rng.uniform(lo, hi), 3)
        if config.window_style == "open":
            a, b = 0.0, horizon
        else:
            a = round(rng.uniform(0, horizon / 2), 2)
            b = round(min(horizon, a + width), 2)
        requests.append(Request(k, x, y, q, a, b))
    return Instance(
        requests=tuple(requests),
        depot=depot,
        depot_window=(0.0, horizon),
        drones=config.drones,
        capacity=config.capacity,
        battery=config.battery,
        speed=config.speed,
        cost_per_distance=config.cost_per_distance,
        energy_cost=config.energy_cost,
        objective=config.objective,
        energy=config.energy,
    )


# ---------------------------------------------------------------------------
# travel tables


@dataclass(frozen=True)
class TravelTables:
    """Flight times (minutes), costs and distances between cluster locations."""

    t: np.ndarray
    c: np.ndarray
    dist: np.ndarray

    def __post_init__(self):
        for arr in (self.t, self.c, self.dist):
            arr.setflags(write=False)

    @property
    def size(self) -> int:
        return self.t.shape[0]

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(self.t - self.t.T) <= tol))


def travel_tables(instance: Instance) -> TravelTables:
    """Euclidean tables over locations 0..n+1, with explicit overrides applied."""
    if not instance.speed > 0:
        raise InstanceError("speed must be positive")
    pts = np.array([instance.location(k) for k in range(instance.n + 2)], dtype=float)
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    t = dist / instance.speed
    c = dist * instance.cost_per_distance
    for (i, j), v in instance.time_overrides:
        t[i, j] = v
    for (i, j), v in instance.cost_overrides:
        c[i, j] = v
    return TravelTables(t=t, c=c, dist=dist)


# ---------------------------------------------------------------------------
# text codec


def _fmt(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.6f}"


def dumps(instance: Instance) -> str:
    lines = [f"DRP {FORMAT_VERSION}"]
    ad, bd = instance.depot_window
    lines.append(
        "PARAMS {} {} {} {} {} {} {} {} {} obj={}".format(
            instance.n,
            instance.drones,
            _fmt(instance.capacity),
            _fmt(instance.battery),
            _fmt(instance.speed),
            _fmt(instance.cost_per_distance),
            _fmt(instance.energy_cost),
            _fmt(ad),
            _fmt(bd),
            instance.objective,
        )
    )
    lines.append(f"DEPOT {_fmt(instance.depot[0])} {_fmt(instance.depot[1])}")
    for r in instance.requests:
        lines.append(f"REQ {r.id} {_fmt(r.x)} {_fmt(r.y)} {_fmt(r.demand)} {_fmt(r.a)} {_fmt(r.b)}")
    for (i, j), v in instance.time_overrides:
        lines.append(f"TIME {i} {j} {_fmt(v)}")
    for (i, j), v in instance.cost_overrides:
        lines.append(f"COST {i} {j} {_fmt(v)}")
    if instance.energy is not None:
        spec = instance.energy
        if spec.kind == "phase":
            lines.append(f"ENERGY phase {spec.params[0]}")
        else:
            lines.append("ENERGY {} {}".format(spec.kind, " ".join(_fmt(v) for v in spec.params)))
    return "\n".join(lines) + "\n"


_PARAM_FIELDS = (
    ("n", "request count"),
    ("N", "drone count"),
    ("Q", "capacity"),
    ("M", "battery"),
    ("speed", "speed"),
    ("cost_per_dist", "cost per distance"),
    ("delta", "energy cost"),
    ("a_d", "depot window open"),
    ("b_d", "depot window close"),
    ("obj", "objective setting"),
)


def _num(tok: str, what: str, line: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"bad {what} {tok!r}", line) from None


def _int(tok: str, what: str, line: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"bad {what} {tok!r}", line) from None


def loads(text: str) -> Instance:
    """Parse the line-oriented instance format written by :func:`dumps`."""
    records = []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        records.append((no, line.split()))
    if not records or records[0][1][0] != "DRP":
        raise ParseError("missing 'DRP' header", records[0][0] if records else 1)
    no, head = records[0]
    if len(head) != 2 or head[1] != str(FORMAT_VERSION):
        raise ParseError(f"unsupported format version {' '.join(head[1:])!r}", no)

    params = None
    depot = None
    reqs = []
    times, costs = [], []
    energy = None
    for no, tok in records[1:]:
        kind, args = tok[0], tok[1:]
        if kind == "PARAMS":
            if len(args) < len(_PARAM_FIELDS):
                raise ParseError(f"missing {_PARAM_FIELDS[len(args)][1]}", no)
            if len(args) > len(_PARAM_FIELDS):
                raise ParseError("too many PARAMS fields", no)
            if not args[9].startswith("obj="):
                raise ParseError(f"expected obj=<setting>, got {args[9]!r}", no)
            params = (no, args)
        elif kind == "DEPOT":
            if len(args) != 2:
                raise ParseError("DEPOT expects 2 fields", no)
            depot = (_num(args[0], "depot x", no), _num(args[1], "depot y", no))
        elif kind == "REQ":
            if len(args) != 6:
                raise ParseError(f"REQ expects 6 fields, got {len(args)}", no)
            rid = _int(args[0], "request id", no)
            x, y, q, a, b = (_num(v, "request field", no) for v in args[1:])
            if q < 0:
                raise ParseError("negative demand", no)
            if q == 0:
                raise ParseError("zero demand", no)
            if a > b:
                raise ParseError("empty time window", no)
            reqs.append((no, Request(rid, x, y, q, a, b)))
        elif kind in ("TIME", "COST"):
            if len(args) != 3:
                raise ParseError(f"{kind} expects 3 fields", no)
            key = (_int(args[0], "index", no), _int(args[1], "index", no))
            val = _num(args[2], kind.lower(), no)
            if val < 0:
                raise ParseError(f"negative {kind.lower()}", no)
            (times if kind == "TIME" else costs).append((key, val))
        elif kind == "ENERGY":
            if not args:
                raise ParseError("ENERGY expects a model kind", no)
            if args[0] == "phase":
                if len(args) != 2:
                    raise ParseError("ENERGY phase expects a table path", no)
                energy = EnergySpec("phase", (args[1],))
            elif args[0] in ("linear", "convex"):
                if len(args) != 3:
                    raise ParseError(f"ENERGY {args[0]} expects 2 parameters", no)
                energy = EnergySpec(args[0], tuple(_num(v, "energy parameter", no) for v in args[1:]))
            else:
                raise ParseError(f"unknown energy model {args[0]!r}", no)
        else:
            raise ParseError(f"unknown record {kind!r}", no)

    if params is None:
        raise ParseError("missing PARAMS record")
    if depot is None:
        raise ParseError("missing DEPOT record")
    pno, p = params
    n = _int(p[0], "request count", pno)
    if n != len(reqs):
        raise ParseError(f"PARAMS declares {n} requests but {len(reqs)} REQ records found", pno)
    for pos, (no, r) in enumerate(reqs, start=1):
        if r.id != pos:
            raise ParseError(f"request ids must be contiguous from 1, got {r.id}", no)
    setting = p[9][4:]
    if setting not in OBJECTIVE_SETTINGS:
        raise ParseError(f"unknown objective setting {setting!r}", pno)
    try:
        return Instance(
            requests=tuple(r for _, r in reqs),
            depot=depot,
            depot_window=(_num(p[7], "a_d", pno), _num(p[8], "b_d", pno)),
            drones=_int(p[1], "drone count", pno),
            capacity=_num(p[2], "capacity", pno),
            battery=_num(p[3], "battery", pno),
            speed=_num(p[4], "speed", pno),
            cost_per_distance=_num(p[5], "cost per distance", pno),
            energy_cost=_num(p[6], "energy cost", pno),
            objective=setting,
            time_overrides=tuple(times),
            cost_overrides=tuple(costs),
            energy=energy,
        )
    except ParseError:
        raise
    except InstanceError as exc:
        raise ParseError(str(exc)) from None


def write_instance(instance: Instance, path: Union[str, Path]) -> None:
    Path(path).write_text(dumps(instance))


def read_instance(path: Union[str, Path]) -> Instance:
    return loads(Path(path).read_text())


def make_instance(
    points: Sequence[tuple],
    demands: Sequence[float],
    windows: Optional[Sequence[tuple]] = None,
    **kwargs,
) -> Instance:
    """Convenience constructor from parallel lists of points, demands and windows."""
    if windows is None:
        windows = [(kwargs.get("depot_window", (0.0, math.inf)))] * len(points)
    reqs = tuple(
        Request(k, float(p[0]), float(p[1]), float(q), float(w[0]), float(w[1]))
        for k, (p, q, w) in enumerate(zip(points, demands, windows), start=1)
    )
    return Instance(requests=reqs, **kwargs)


# ---------------------------------------------------------------------------
# leg times


class LegTimes:
    """Flight minutes between cluster locations for a given payload (kg)."""

    load_dependent = False

    def __init__(self, tables: TravelTables):
        self.tables = tables

    def __call__(self, i: int, j: int, payload: float) -> float:
        return float(self.tables.t[i, j])

    def matrix(self, payload: float) -> np.ndarray:
        return self.tables.t


class SlowdownLegTimes(LegTimes):
    """Heavier drones fly slower: ``t_ij * (1 + slowdown * payload)``."""

    load_dependent = True

    def __init__(self, tables: TravelTables, slowdown: float):
        if slowdown < 0:
            raise InstanceError("slowdown must be nonnegative")
        super().__init__(tables)
        self.slowdown = float(slowdown)

    def __call__(self, i, j, payload):
        return float(self.tables.t[i, j]) * (1.0 + self.slowdown * payload)

    def matrix(self, payload):
        return self.tables.t * (1.0 + self.slowdown * payload)
