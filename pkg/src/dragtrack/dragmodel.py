"""Analytic drag-rate and drag-acceleration terms for the exponential atmosphere.

For the nominal model (constant aero coefficients, no density perturbation)
the drag acceleration obeys

    dD/dt   = p(D, t)
    d2D/dt2 = f(D, t) + g0(D, t) * cos(sigma)

where p collects the log-derivative of rho*v^2*C_D along the flow, f is the
bank-independent part of the second derivative, and g0 multiplies the
bank-modulated lift term entering through the flight-path-angle rate.
"""

import math
from dataclasses import dataclass

from numba import njit

# Below this magnitude the control effectiveness g0 is treated as degenerate
# (rarefied early-entry flight): commands saturate and gain-sign bookkeeping
# built on partials of 1/g0 is suspended. The division itself stays exact.
G0_FLOOR = 1e-6


class GZeroSingularError(RuntimeError):
    """Raised when a control computation needs 1/g0 but g0 carries no sign."""


@dataclass(frozen=True)
class DragKinematics:
    """Point quantities feeding p, f and g0 (SI units, radians)."""

    d: float      # drag acceleration, m/s^2
    v: float      # velocity, m/s
    gamma: float  # flight path angle, rad
    g: float      # gravity, m/s^2
    r: float      # radial position, m
    l: float      # lift acceleration, m/s^2
    c: float = 0.0      # coefficient-rate term Cdot_D0 / C_D0, 1/s
    c_dot: float = 0.0  # time derivative of c, 1/s^2

    def __post_init__(self):
        if not self.d > 0.0:
            raise ValueError("DragKinematics.d must be positive")
        if not self.v > 0.0:
            raise ValueError("DragKinematics.v must be positive")
        if not abs(self.gamma) < math.pi / 2:
            raise ValueError("flight path angle outside (-90deg, 90deg)")


@njit(cache=True)
def p_scalar(d, v, gamma, g, c, hs):
    sg = math.sin(gamma)
    return (-v * sg / hs - 2.0 * d / v - 2.0 * g * sg / v + c) * d


@njit(cache=True)
def f_g0_scalar(d, v, gamma, g, r, lift, c, c_dot, hs):
    """Bank-independent drag second derivative f and control-input gain g0.

    The v^2*cos^2(gamma)/(r*hs) contribution enters f with a minus sign;
    that sign is fixed by the total-derivative identity d2D/dt2 = d(p)/dt
    along the plant flow (cross-checked against finite differences of
    integrated trajectories in the test suite).
    """
    sg = math.sin(gamma)
    cg = math.cos(gamma)
    a = -v * sg / hs - 2.0 * d / v - 2.0 * g * sg / v + c
    first = (a - 2.0 * d / v) * (a * d)
    bracket = ((d * sg + g) / hs
               + (4.0 * g * sg * sg - 2.0 * g * cg * cg) / r
               - (2.0 * d * d + 4.0 * d * g * sg
                  + 2.0 * g * g * sg * sg - 2.0 * g * g * cg * cg) / (v * v)
               - v * v * cg * cg / (r * hs)
               + c_dot)
    f = first + d * bracket
    g0 = -(v / hs + 2.0 * g / v) * lift * d * cg / v
    return f, g0


def p_term(k: DragKinematics, hs: float) -> float:
    """Nominal drag rate p(D, t), m/s^3."""
    return p_scalar(k.d, k.v, k.gamma, k.g, k.c, hs)


def f_g0_terms(k: DragKinematics, hs: float):
    """(f, g0) in m/s^4. g0 < 0 whenever lift, drag > 0 and |gamma| < 90deg."""
    if not (k.v > 0.0 and k.r > 0.0 and hs > 0.0):
        raise ValueError("v, r and hs must be positive")
    return f_g0_scalar(k.d, k.v, k.gamma, k.g, k.r, k.l, k.c, k.c_dot, hs)


def invert_g0(g0: float) -> float:
    """1/g0 guarded against IEEE overflow only; raises when g0 == 0.

    No magnitude floor: the feedforward part of any g0**-1 command scales
    with g0 itself, so the exact ratio stays meaningful however rarefied the
    atmosphere. Downstream clamping absorbs the amplified feedback part.
    """
    if g0 == 0.0:
        raise GZeroSingularError("g0 is exactly zero; bank direction undefined")
    return math.copysign(1.0 / max(abs(g0), 1e-300), g0)
