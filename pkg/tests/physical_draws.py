"""Random physical settings for the phase-model tests."""

import numpy as np

from drp.energy import PhysicalParams, phase_coefficients


def random_physical(rng: np.random.Generator, hover: bool = False) -> PhysicalParams:
    """A draw whose induced-velocity equation is well posed for total weights in [0.2, 12] kg."""
    while True:
        p = _draw(rng, hover)
        a = phase_coefficients(p)
        loads = np.linspace(0.2, 12.0, 25)
        if np.all(a[11] * loads ** 2 + a[12] + a[13] * loads > 0):
            return p


def _draw(rng, hover):
    return PhysicalParams(
        speed=0.0 if hover else rng.uniform(0.5, 20.0),
        angle=0.0 if hover else rng.uniform(-0.5, 0.5),
        air_density=rng.uniform(0.9, 1.3),
        frontal_area=rng.uniform(0.01, 0.2),
        drag_coefficient=rng.uniform(0.5, 1.5),
        internal_power=rng.uniform(0.0, 50.0),
        climb_power=rng.uniform(0.0, 100.0),
        power_factor=rng.uniform(1.0, 1.3),
        profile_drag=rng.uniform(0.005, 0.02),
        chord=rng.uniform(0.02, 0.1),
        rotors=int(rng.integers(3, 9)),
        blades=int(rng.integers(2, 4)),
        rotor_radius=rng.uniform(0.1, 0.5),
        lift_coefficient=rng.uniform(0.2, 0.8),
        gravity=9.81,
    )
