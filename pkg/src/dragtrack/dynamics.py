"""3-DOF point-mass entry dynamics over a non-rotating planet.

Angles are radians and everything is SI internally; degrees appear only at
I/O boundaries (config files, CSV headers note units).
"""

import math
from dataclasses import dataclass

from numba import njit

# ds/dt carries a leading minus for forward flight, so the plain state s
# decreases; travelled downrange is reported as DOWNRANGE_SIGN * s.
DOWNRANGE_SIGN = -1.0


@dataclass
class VehicleState:
    """Integrated plant states (SI, radians)."""

    r: float      # radial position, m
    phi: float    # longitude, rad
    theta: float  # latitude, rad
    v: float      # velocity, m/s
    gamma: float  # flight path angle, rad
    chi: float    # heading angle, rad
    s: float      # signed downrange integral, m (see DOWNRANGE_SIGN)

    def __post_init__(self):
        if not self.r > 0.0:
            raise ValueError("VehicleState.r must be positive")
        if not self.v > 0.0:
            raise ValueError("VehicleState.v must be positive")
        if not abs(self.gamma) < math.pi / 2:
            raise ValueError("flight path angle outside (-90deg, 90deg)")
        if not abs(self.theta) < math.pi / 2:
            raise ValueError("latitude outside (-90deg, 90deg)")

    def as_array(self):
        return [self.r, self.phi, self.theta, self.v, self.gamma, self.chi, self.s]


@dataclass(frozen=True)
class VehicleParams:
    """Mass/aero constants plus fixed per-run multiplicative dispersions."""

    m: float       # kg
    S: float       # m^2
    cl0: float     # nominal lift coefficient
    cd0: float     # nominal drag coefficient
    d_cl: float = 0.0
    d_cd: float = 0.0
    d_m: float = 0.0

    def __post_init__(self):
        if not (self.m > 0.0 and self.S > 0.0 and self.cd0 > 0.0):
            raise ValueError("mass, reference area and cd0 must be positive")
        if not self.cd0 * (1.0 + self.d_cd) > 0.0:
            raise ValueError("dispersed drag coefficient must stay positive")
        if not self.m * (1.0 + self.d_m) > 0.0:
            raise ValueError("dispersed mass must stay positive")

    @property
    def lift_over_drag(self) -> float:
        return self.cl0 / self.cd0

    @property
    def ballistic_coefficient(self) -> float:
        """m / (S * cd0), kg/m^2."""
        return self.m / (self.S * self.cd0)

    def accel_factors(self):
        """(kl, kd) with L = kl*rho*v^2 and D = kd*rho*v^2, dispersions applied."""
        m_eff = self.m * (1.0 + self.d_m)
        kl = self.S * self.cl0 * (1.0 + self.d_cl) / (2.0 * m_eff)
        kd = self.S * self.cd0 * (1.0 + self.d_cd) / (2.0 * m_eff)
        return kl, kd


def aero_accel(state: VehicleState, params: VehicleParams, rho: float):
    """Lift and drag accelerations (m/s^2) at the given state and density."""
    if rho < 0.0:
        raise ValueError("negative density")
    kl, kd = params.accel_factors()
    q = rho * state.v * state.v
    return kl * q, kd * q


@njit(cache=True)
def plant_rates(r, theta, v, gamma, chi, lift, drag, g, cos_sigma, sin_sigma, r0):
    """Scalar time derivatives of (r, phi, theta, v, gamma, chi, s)."""
    sg = math.sin(gamma)
    cg = math.cos(gamma)
    dr = v * sg
    dphi = v * cg * math.sin(chi) / (r * math.cos(theta))
    dtheta = v * cg * math.cos(chi) / r
    dv = -drag - g * sg
    dgamma = lift * cos_sigma / v - (g / v - v / r) * cg
    dchi = lift * sin_sigma / (v * cg) + v * cg * math.sin(chi) * math.tan(theta) / r
    ds = -v * r0 * cg / r
    return dr, dphi, dtheta, dv, dgamma, dchi, ds


def state_derivative(state: VehicleState, lift: float, drag: float, g: float,
                     sigma: float, r0: float):
    """Time derivative of VehicleState under bank angle sigma (rad).

    Raises near the polar singularity where cos(theta) vanishes.
    """
    if math.cos(state.theta) < 1e-5:
        raise ValueError("polar singularity: |latitude| too close to 90deg")
    rates = plant_rates(state.r, state.theta, state.v, state.gamma, state.chi,
                        lift, drag, g, math.cos(sigma), math.sin(sigma), r0)
    return rates
