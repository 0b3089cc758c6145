"""Small named instances used by the tests, the benchmark and the CLI."""

from __future__ import annotations

from typing import Callable, Dict

from .energy import ConvexEnergy, EnergyModel, LinearEnergy
from .instance import EnergySpec, GeneratorConfig, Instance, make_instance


def pair(objective: str = "RE") -> Instance:
    """Two requests at right angles; energy-optimal and cost-optimal plans tie under RE."""
    return make_instance(
        [(0, 3), (4, 0)], [1, 1], capacity=2, battery=1000, drones=2, objective=objective,
        energy=EnergySpec("linear", (1.0, 1.0)),
    )


def four_spokes(objective: str = "R") -> Instance:
    """Four requests around the depot where only request 4 can share a trip."""
    return make_instance(
        [(1, 0), (0, 1), (-1, 0), (0, -1)], [0.3, 0.3, 0.3, 0.2], capacity=0.5, drones=2,
        objective=objective, energy=EnergySpec("linear", (1.0, 1.0)),
    )


def forced_wait(objective: str = "RE") -> Instance:
    """Request 1 must be served by t=1 and request 2 not before t=10 on the same line.

    Serving both in one trip forces an 8-minute wait at request 2.
    """
    return make_instance(
        [(0, 1), (0, 2)], [1, 1], windows=[(0, 1), (10, 100)], depot_window=(0, 100),
        capacity=2, drones=1, objective=objective, energy_cost=1.0,
        energy=EnergySpec("linear", (0.1, 0.1)),
    )


def single(distance: float = 5.0, objective: str = "R") -> Instance:
    return make_instance([(distance, 0)], [1], capacity=1, drones=1, objective=objective,
                         energy=EnergySpec("linear", (1.0, 1.0)))


NAMED: Dict[str, Callable[..., Instance]] = {
    "pair": pair,
    "four-spokes": four_spokes,
    "forced-wait": forced_wait,
    "single": single,
}


def oracle_config(n: int, energy: str = "linear", objective: str = "RE") -> GeneratorConfig:
    """Generator settings for the MILP-versus-enumeration suite.

    A 10x10 area, demands that allow two or three parcels per trip, a battery
    that rules out some long trips, random windows and two drones.
    """
    if energy == "linear":
        spec = EnergySpec("linear", (0.2, 1.0))
        battery = 45.0
    elif energy == "convex":
        spec = EnergySpec("convex", (0.5, 1.5))
        battery = 45.0
    else:
        raise ValueError(f"unknown suite energy model {energy!r}")
    return GeneratorConfig(
        n=n, area_size=10.0, depot_style="corner", window_style="random",
        demand_range=(0.3, 1.0), drones=2, capacity=2.0, battery=battery,
        speed=1.0, cost_per_distance=1.0, energy_cost=0.5, horizon=120.0,
        window_width=0.6, objective=objective, energy=spec,
    )


def suite_model(energy: str) -> EnergyModel:
    if energy == "linear":
        return LinearEnergy(0.2, 1.0)
    if energy == "convex":
        return ConvexEnergy(0.5, 1.5)
    raise ValueError(energy)


__all__ = ["pair", "four-spokes", "forced_wait", "single", "NAMED", "oracle_config", "suite_model"]
