"""Exponential atmosphere and inverse-square gravity for a non-rotating planet."""

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class PlanetModel:
    """Planet constants: gravitational parameter, reference radius, surface density, scale height."""

    mu: float   # m^3/s^2
    r0: float   # m, reference radius (altitude datum)
    rho0: float # kg/m^3, density at the reference radius
    hs: float   # m, e-folding scale height

    def __post_init__(self):
        for name in ("mu", "r0", "rho0", "hs"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"PlanetModel.{name} must be strictly positive")


@dataclass(frozen=True)
class DensityDispersion:
    """Constant multiplicative density deviation: rho = (1 + frac) * rho_nominal(h)."""

    frac: float = 0.0

    def __post_init__(self):
        if not self.frac > -1.0:
            raise ValueError("invalid dispersion: density fraction must exceed -1")


# Standard Mars-entry constants (configurable; nothing below depends on them).
MARS = PlanetModel(mu=4.2828e13, r0=3397e3, rho0=0.0158, hs=9354.0)

NO_DISPERSION = DensityDispersion(0.0)


def density(planet: PlanetModel, h: float, disp: DensityDispersion = NO_DISPERSION) -> float:
    """Atmospheric density at altitude h (m), kg/m^3."""
    if h < -planet.hs:
        raise ValueError(f"altitude {h} m below -hs; outside the model's validity range")
    return (1.0 + disp.frac) * planet.rho0 * math.exp(-h / planet.hs)


def gravity(planet: PlanetModel, r: float) -> float:
    """Gravitational acceleration mu/r^2 at radial position r (m), m/s^2."""
    if r <= 0.0:
        raise ValueError("nonpositive radius")
    return planet.mu / (r * r)
