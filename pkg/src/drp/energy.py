"""Energy consumption models for drone flights.

Every model maps a payload weight (kg) and a flight time (minutes) to consumed
battery energy, and reports the power drawn while hovering with a given
payload. Routing code treats models as black boxes; only the ``time_proportional``
and ``rate_increasing`` flags are inspected, to decide whether pruning can rely
on the energy of a trip growing with every added customer.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace as _replace
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

PHASES = ("takeoff", "level", "hover", "landing")
TAKEOFF, LEVEL, HOVER, LANDING = range(4)


class EnergyModelError(ValueError):
    pass


class RootNotBracketedError(EnergyModelError):
    """The induced-velocity equation showed no sign change; parameters are inconsistent."""


class MultipleRootsWarning(RuntimeWarning):
    pass


class EnergyModel:
    """Base class; subclasses implement :meth:`arc_energy` and :meth:`hover_power`."""

    name = "abstract"
    #: energy equals ``time * rate(weight)``
    time_proportional = False
    #: ``rate`` is nondecreasing in the weight (only meaningful when time-proportional)
    rate_increasing = False
    supports_per_phase = False

    def arc_energy(self, weight: float, time: float) -> float:
        raise NotImplementedError

    def hover_power(self, weight: float) -> float:
        raise NotImplementedError

    def arc_energy_array(self, weight: float, times: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`arc_energy` over an array of flight times."""
        times = np.asarray(times, dtype=float)
        if self.time_proportional:
            return times * self.rate(weight)
        flat = [self.arc_energy(weight, float(t)) for t in times.ravel()]
        return np.array(flat, dtype=float).reshape(times.shape)

    def rate(self, weight: float) -> float:
        if not self.time_proportional:
            raise EnergyModelError(f"{self.name} model has no constant per-minute rate")
        return self.arc_energy(weight, 1.0)


@dataclass(frozen=True)
class LinearEnergy(EnergyModel):
    """``time * (slope * weight + base)``."""

    slope: float
    base: float

    name = "linear"
    time_proportional = True
    rate_increasing = True

    def __post_init__(self):
        if self.slope < 0 or not self.base > 0:
            raise EnergyModelError("linear model needs slope >= 0 and base > 0")

    def arc_energy(self, weight, time):
        return time * (self.slope * weight + self.base)

    def hover_power(self, weight):
        # no separate hover law for this model; use the flight rate
        return self.slope * weight + self.base


@dataclass(frozen=True)
class ConvexEnergy(EnergyModel):
    """``time * alpha * (beta + weight) ** 1.5`` with ``beta`` the frame-plus-battery weight."""

    alpha: float
    beta: float

    name = "convex"
    time_proportional = True
    rate_increasing = True

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise EnergyModelError("convex model needs alpha > 0 and beta > 0")

    def arc_energy(self, weight, time):
        return time * self.alpha * (self.beta + weight) ** 1.5

    def hover_power(self, weight):
        return self.alpha * (self.beta + weight) ** 1.5


class TabulatedEnergy(EnergyModel):
    """Time-proportional model whose per-minute rate is interpolated from a table.

    Useful for stress-testing pruning with rates that are not monotone in the
    payload. Weights outside the table are clamped to the end values.
    """

    name = "tabulated"
    time_proportional = True

    def __init__(self, weights: Sequence[float], rates: Sequence[float]):
        self.weights = np.asarray(weights, dtype=float)
        self.rates = np.asarray(rates, dtype=float)
        if self.weights.ndim != 1 or self.weights.shape != self.rates.shape or len(self.weights) < 1:
            raise EnergyModelError("weights and rates must be equal-length 1-d sequences")
        if np.any(np.diff(self.weights) <= 0):
            raise EnergyModelError("weights must be strictly increasing")
        if np.any(self.rates < 0):
            raise EnergyModelError("rates must be nonnegative")
        self.rate_increasing = bool(np.all(np.diff(self.rates) >= 0))

    def _rate(self, weight):
        return float(np.interp(weight, self.weights, self.rates))

    def arc_energy(self, weight, time):
        return time * self._rate(weight)

    def hover_power(self, weight):
        return self._rate(weight)


# ---------------------------------------------------------------------------
# phase-based model


def _induced_coeffs(alpha: Sequence[float], load: float):
    a = alpha
    lhs = a[7] * math.sqrt(a[2] + a[3] * load * load)
    den = a[11] * load * load + a[12] + a[13] * load
    if den <= 0:
        raise EnergyModelError(f"non-positive denominator {den!r} in induced-velocity equation")
    kappa = (a[9] + a[10] * load) / math.sqrt(den)
    return lhs, kappa


def _rhs(x: float, a9: float, kappa: float) -> float:
    # x * (x + kappa) keeps the cancellation to one rounding when kappa ~ -x
    inner = a9 + x * (x + kappa)
    return x * math.sqrt(inner) if inner > 0 else 0.0


def _first_peak(lhs: float, a9: float, kappa: float) -> Optional[float]:
    """Local maximum of the squared equation lying above zero, if the equation has several roots.

    The squared form ``p(x) = x^4 + kappa x^3 + a9 x^2 - lhs^2`` starts negative
    at 0; more than one positive root needs a positive local max followed by a
    negative local min. The smallest root then lies below that maximum.
    """
    disc = 9 * kappa * kappa - 32 * a9
    if disc <= 0:
        return None
    r = math.sqrt(disc)
    x1, x2 = (-3 * kappa - r) / 8, (-3 * kappa + r) / 8
    if x1 <= 0:
        return None

    def p(x):
        return x ** 4 + kappa * x ** 3 + a9 * x * x - lhs * lhs

    return x1 if p(x1) > 0 and p(x2) < 0 else None


def _has_multiple_positive_roots(lhs: float, a9: float, kappa: float) -> bool:
    return _first_peak(lhs, a9, kappa) is not None


def solve_induced_velocity(alpha: Sequence[float], beta: float, weight: float) -> float:
    """Smallest positive root ``X`` of the induced-velocity equation for one flight phase.

    ``alpha`` holds the 14 phase coefficients (0-based). Normally the root is
    unique: the bracket ``[0, hi]`` is grown by doubling (at most 60 times)
    until the right-hand side exceeds the left. When several roots exist a
    warning is issued and the bracket ends at the first local maximum, so the
    smallest root is returned. Bisection narrows the bracket to 1e-12 in
    ``X`` and goes on toward float resolution until the residual is a
    thousandth of the accepted tolerance.
    """
    if weight < 0:
        raise EnergyModelError("payload weight must be nonnegative")
    load = beta + weight
    lhs, kappa = _induced_coeffs(alpha, load)
    a9 = alpha[8]
    if lhs == 0:
        return 0.0

    def g(x):
        return _rhs(x, a9, kappa) - lhs

    tol = 1e-10 * max(1.0, lhs)
    aim = 1e-3 * tol
    peak = _first_peak(lhs, a9, kappa)
    if peak is not None:
        warnings.warn(
            f"induced-velocity equation has several positive roots at load {load:g}",
            MultipleRootsWarning,
            stacklevel=2,
        )
        lo, hi = 0.0, peak
    else:
        lo, hi = 0.0, max(math.sqrt(lhs), 1e-9)
        for _ in range(61):
            if g(hi) >= 0:
                break
            lo, hi = hi, 2 * hi
        else:
            raise RootNotBracketedError(
                f"no sign change up to X={hi:g} (lhs={lhs:g}, kappa={kappa:g})"
            )
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if hi - lo <= 1e-12 and min(abs(g(lo)), abs(g(hi))) <= aim:
            break
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    x = lo if abs(g(lo)) < abs(g(hi)) else hi
    if abs(g(x)) > tol:
        raise EnergyModelError(f"induced-velocity residual {abs(g(x)):g} above tolerance")
    return x


def induced_velocity_residual(alpha: Sequence[float], beta: float, weight: float, x: float) -> float:
    lhs, kappa = _induced_coeffs(alpha, beta + weight)
    return abs(_rhs(x, alpha[8], kappa) - lhs)


def phase_power(alpha: Sequence[float], beta: float, weight: float) -> float:
    """Power drawn in one phase with the given payload (energy per minute)."""
    a = alpha
    load = beta + weight
    p = a[0] + a[4] * load ** 1.5 + a[5] * math.sqrt(load) + a[6] * load
    if a[1] != 0:
        phi = solve_induced_velocity(a, beta, weight)
        p += a[1] * phi * math.sqrt(a[2] + a[3] * load * load)
    return float(p)


@dataclass(frozen=True)
class PhasePolicy:
    """Splits a leg time into takeoff, level, hover and landing minutes.

    Takeoff and landing last ``altitude / climb_speed`` and
    ``altitude / descent_speed``; level flight takes the rest. Legs too short
    for a full climb and descent are scaled down proportionally so the phase
    times still sum to the leg time.
    """

    altitude: float = 0.0
    climb_speed: float = 1.0
    descent_speed: float = 1.0

    def split(self, time: float) -> tuple:
        if time <= 0:
            return (0.0, 0.0, 0.0, 0.0)
        up = self.altitude / self.climb_speed
        down = self.altitude / self.descent_speed
        if up + down > time:
            scale = time / (up + down)
            return (up * scale, 0.0, 0.0, time - up * scale)
        return (up, time - up - down, 0.0, down)

    def split_array(self, times: np.ndarray) -> tuple:
        times = np.maximum(np.asarray(times, dtype=float), 0.0)
        up = self.altitude / self.climb_speed
        down = self.altitude / self.descent_speed
        vertical = up + down
        short = times < vertical
        scale = np.where(short, times / vertical if vertical > 0 else 0.0, 1.0)
        t_up = up * scale
        t_down = np.where(short, times - t_up, down)
        level = np.where(short, 0.0, times - up - down)
        return (t_up, level, np.zeros_like(times), t_down)


@dataclass(frozen=True)
class SinglePhasePolicy:
    """Assigns the whole leg time to one phase."""

    phase: int = LEVEL

    def split(self, time: float) -> tuple:
        out = [0.0, 0.0, 0.0, 0.0]
        out[self.phase] = max(time, 0.0)
        return tuple(out)

    def split_array(self, times: np.ndarray) -> tuple:
        times = np.maximum(np.asarray(times, dtype=float), 0.0)
        out = [np.zeros_like(times) for _ in range(4)]
        out[self.phase] = times
        return tuple(out)


class PhaseEnergy(EnergyModel):
    """Four-phase rotorcraft model: ``sum_i t_i * G(weight, i)``.

    ``coefficients`` is a 4x14 array, one row per phase in the order takeoff,
    level, hover, landing.
    """

    name = "phase"
    supports_per_phase = True

    def __init__(self, coefficients, beta: float, policy=None):
        self.coefficients = np.array(coefficients, dtype=float)
        if self.coefficients.shape != (4, 14):
            raise EnergyModelError("phase coefficient table must be 4x14")
        if not beta > 0:
            raise EnergyModelError("beta must be positive")
        self.beta = float(beta)
        self.policy = policy if policy is not None else PhasePolicy()
        self._cache: dict = {}

    def power(self, weight: float, phase: int) -> float:
        key = (weight, phase)
        val = self._cache.get(key)
        if val is None:
            val = phase_power(self.coefficients[phase], self.beta, weight)
            self._cache[key] = val
        return val

    def phase_times(self, time: float) -> tuple:
        return self.policy.split(time)

    def arc_energy(self, weight, time):
        total = 0.0
        for phase, dt in enumerate(self.phase_times(time)):
            if dt:
                total += dt * self.power(weight, phase)
        return total

    def arc_energy_array(self, weight, times):
        times = np.asarray(times, dtype=float)
        if not hasattr(self.policy, "split_array"):
            return super().arc_energy_array(weight, times)
        total = np.zeros_like(times)
        for phase, dt in enumerate(self.policy.split_array(times)):
            if np.any(dt):
                total += dt * self.power(weight, phase)
        return total

    def hover_power(self, weight):
        return self.power(weight, HOVER)


@dataclass(frozen=True)
class PhysicalParams:
    """Environment, airframe and flight settings for one phase (SI units).

    ``angle`` is the flight path angle in radians (positive when climbing) and
    must stay strictly inside (-pi/2, pi/2).
    """

    speed: float = 10.0
    angle: float = 0.0
    air_density: float = 1.225
    frontal_area: float = 0.1
    drag_coefficient: float = 1.0
    internal_power: float = 0.0
    climb_power: float = 0.0
    power_factor: float = 1.0
    profile_drag: float = 0.012
    chord: float = 0.05
    rotors: int = 4
    blades: int = 2
    rotor_radius: float = 0.2
    lift_coefficient: float = 0.4
    gravity: float = 9.81


def phase_coefficients(p: PhysicalParams) -> np.ndarray:
    """The 14 coefficients of one phase derived from physical settings."""
    rho, v, g = p.air_density, p.speed, p.gravity
    drag = rho * v * v * p.frontal_area * p.drag_coefficient
    cos, tan = math.cos(p.angle), math.tan(p.angle)
    rotor = p.chord * p.rotors * p.blades * rho * p.rotor_radius
    return np.array([
        0.5 * drag * v + p.internal_power,
        p.power_factor,
        0.25 * drag * drag + drag * p.climb_power,
        g * g,
        27 * p.profile_drag * math.sqrt(g ** 3) / math.sqrt(rotor * p.lift_coefficient ** 3),
        v * v * p.profile_drag * math.sqrt(6 * g * rotor) / (4 * math.sqrt(p.lift_coefficient)),
        g * v * math.sin(p.angle),
        1.0 / (2 * rho * p.rotor_radius ** 2 * math.pi * p.rotors),
        v * v,
        -drag * v / (g * cos),
        -2 * v * tan,
        1 + tan * tan,
        (0.5 * drag / (g * cos)) ** 2,
        drag * tan,
    ])


def default_phase_model(beta: float = 1.5, airframe: Optional[PhysicalParams] = None) -> PhaseEnergy:
    """A quadcopter climbing and descending at 3 m/s and cruising at 10 m/s.

    Powers are converted from watts to kJ per minute so they sit on the same
    scale as flight times in minutes.
    """
    base = airframe or PhysicalParams()
    settings = [
        dict(speed=3.0, angle=0.6),
        dict(speed=10.0, angle=0.0),
        dict(speed=0.0, angle=0.0),
        dict(speed=3.0, angle=-0.6),
    ]
    rows = []
    for kw in settings:
        a = phase_coefficients(_replace(base, **kw))
        # alpha_1, alpha_2, alpha_5..alpha_7 scale the power; the rest shape the root
        a[[0, 1, 4, 5, 6]] *= 60.0 / 1000.0
        rows.append(a)
    return PhaseEnergy(rows, beta, PhasePolicy(altitude=0.5, climb_speed=1.0, descent_speed=1.0))


def linear_energy(slope: float, base: float, weight: float, time: float) -> float:
    return LinearEnergy(slope, base).arc_energy(weight, time)


def convex_energy(alpha: float, beta: float, weight: float, time: float) -> float:
    return ConvexEnergy(alpha, beta).arc_energy(weight, time)


# ---------------------------------------------------------------------------
# phase coefficient tables


def write_phase_table(path: Union[str, Path], model: PhaseEnergy) -> None:
    lines = ["# alpha_1 .. alpha_14 per phase"]
    for name, row in zip(PHASES, model.coefficients):
        lines.append("PHASE {} {}".format(name, " ".join(repr(float(v)) for v in row)))
    lines.append(f"BETA {model.beta!r}")
    pol = model.policy
    if isinstance(pol, PhasePolicy):
        lines.append(f"POLICY {pol.altitude!r} {pol.climb_speed!r} {pol.descent_speed!r}")
    elif isinstance(pol, SinglePhasePolicy):
        lines.append(f"POLICY single {PHASES[pol.phase]}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_phase_table(path: Union[str, Path]) -> PhaseEnergy:
    rows = {}
    beta = None
    policy = None
    for no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        tok = raw.split()
        if not tok or tok[0].startswith("#"):
            continue
        try:
            if tok[0] == "PHASE":
                if tok[1] not in PHASES or len(tok) != 16:
                    raise EnergyModelError(f"line {no}: expected PHASE <name> and 14 coefficients")
                rows[tok[1]] = [float(v) for v in tok[2:]]
            elif tok[0] == "BETA":
                beta = float(tok[1])
            elif tok[0] == "POLICY":
                if tok[1] == "single":
                    policy = SinglePhasePolicy(PHASES.index(tok[2]))
                else:
                    policy = PhasePolicy(*(float(v) for v in tok[1:4]))
            else:
                raise EnergyModelError(f"line {no}: unknown record {tok[0]!r}")
        except (ValueError, IndexError):
            raise EnergyModelError(f"line {no}: malformed record") from None
    missing = [p for p in PHASES if p not in rows]
    if missing or beta is None:
        raise EnergyModelError(f"phase table incomplete (missing {missing or 'BETA'})")
    return PhaseEnergy([rows[p] for p in PHASES], beta, policy)


def model_from_spec(spec, base_dir: Optional[Union[str, Path]] = None) -> EnergyModel:
    """Build a model from an instance's :class:`~drp.instance.EnergySpec`."""
    if spec.kind == "linear":
        return LinearEnergy(*spec.params)
    if spec.kind == "convex":
        return ConvexEnergy(*spec.params)
    if spec.kind == "phase":
        p = Path(spec.params[0])
        if base_dir is not None and not p.is_absolute():
            p = Path(base_dir) / p
        return read_phase_table(p)
    raise EnergyModelError(f"unknown energy model {spec.kind!r}")


# ---------------------------------------------------------------------------
# trips

LegTime = Callable[[int, int, float], float]


def load_weight(instance, members) -> float:
    """Total demand of a collection of request ids, summed in a fixed order."""
    return math.fsum(instance.requests[r - 1].demand for r in sorted(members))


def table_leg_time(tables) -> LegTime:
    t = tables.t

    def leg(i, j, payload):
        return float(t[i, j])

    return leg


def trip_legs(trip: Sequence[int], instance, tables, leg_time: Optional[LegTime] = None):
    """Yield ``(from, to, payload, minutes)`` for depot -> trip -> depot.

    The payload of a leg is the demand still aboard when it is flown; a
    request's parcel leaves the drone on arrival.
    """
    if leg_time is None:
        leg_time = table_leg_time(tables)
    remaining = set(trip)
    prev = 0
    for r in trip:
        w = load_weight(instance, remaining)
        yield prev, r, w, leg_time(prev, r, w)
        remaining.discard(r)
        prev = r
    end = instance.n + 1
    yield prev, end, 0.0, leg_time(prev, end, 0.0)


def trip_energy(model: EnergyModel, trip: Sequence[int], instance, tables,
                leg_time: Optional[LegTime] = None) -> float:
    """Energy to fly ``trip`` from the depot and back; zero for an empty trip."""
    if not trip:
        return 0.0
    return sum(model.arc_energy(w, dt) for _, _, w, dt in trip_legs(trip, instance, tables, leg_time))


def hover_power(model: EnergyModel, weight: float) -> float:
    return model.hover_power(weight)
