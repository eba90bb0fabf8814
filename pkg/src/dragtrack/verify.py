"""Numerical checks of the stability machinery behind the guidance law.

Three independent facilities:
  * hurwitz_check validates the observer/controller gain structure against
    the closed-form Hurwitz conditions of the two design matrices;
  * nussbaum_property_scan evaluates the running mean integral of
    N(z) = exp(z^2) cos(pi z / 2) and exposes its alternating divergence;
  * vx_monitor evaluates the exponentially weighted integral that the
    boundedness lemma requires to stay finite on completed runs.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .guidance import GuidanceGains, nussbaum, smooth_sat
from .observer import ObserverGains

# exp(z^2) overflows past z ~ 26.6; scans stay below this
SCAN_LIMIT = 20.0


class QuadratureFailureError(RuntimeError):
    """Adaptive quadrature did not converge to the requested tolerance."""


class MisalignedHistoriesError(ValueError):
    """Time, state and weight histories disagree in length."""


@dataclass
class HurwitzReport:
    ok: bool
    reasons: list

    def __bool__(self):
        return self.ok


def hurwitz_check(obs, guid) -> HurwitzReport:
    """Closed-form stability check of the observer and error-design matrices.

    The observer matrix [[-h1, 1], [-h2, 0]] is Hurwitz iff h1 > 0 and
    h2 > 0 (trace/determinant). The error design with characteristic
    polynomial s^3 + a1 s^2 + a2 s + a3 is Hurwitz iff all coefficients are
    positive and a1*a2 > a3 (Routh). The no-integral variant reduces to
    s^2 + a1 s + a2, requiring only a1, a2 > 0.

    Accepts gains objects or plain tuples (h1, h2) and (a1, a2, a3).
    """
    if isinstance(obs, ObserverGains):
        h1, h2 = obs.h1, obs.h2
    else:
        h1, h2 = obs
    if isinstance(guid, GuidanceGains):
        a1, a2, a3 = guid.alpha1, guid.alpha2, guid.alpha3_effective
        integral = guid.integral_enabled
    else:
        a1, a2, a3 = guid
        integral = True
    reasons = []
    if not (h1 > 0.0 and h2 > 0.0):
        reasons.append("observer gains must satisfy h1 > 0 and h2 > 0")
    if integral:
        if not (a1 > 0.0 and a2 > 0.0 and a3 > 0.0):
            reasons.append("alpha1, alpha2, alpha3 must all be positive")
        elif not a1 * a2 > a3:
            reasons.append(
                f"Routh condition failed: alpha1*alpha2 = {a1 * a2:.6g} must "
                f"exceed alpha3 = {a3:.6g} (s^3 + a1 s^2 + a2 s + a3)")
    else:
        if not (a1 > 0.0 and a2 > 0.0):
            reasons.append("alpha1, alpha2 must be positive (no-integral law)")
    return HurwitzReport(ok=not reasons, reasons=reasons)


def hurwitz_check_values(h1, h2, a1, a2, a3) -> bool:
    """Raw-coefficient form of hurwitz_check, for sweeps."""
    return (h1 > 0.0 and h2 > 0.0
            and a1 > 0.0 and a2 > 0.0 and a3 > 0.0 and a1 * a2 > a3)


def nussbaum_mean_integral(s: float, epsrel: float = 1e-10) -> float:
    """(1/s) * integral of N(z) dz from 0 to s by adaptive quadrature.

    The integrand spans ~e^(s^2) in magnitude, so only relative accuracy is
    requested and scans are capped at SCAN_LIMIT to stay inside the double
    range.
    """
    if not 0.0 < s <= SCAN_LIMIT:
        raise ValueError(f"s must lie in (0, {SCAN_LIMIT}]")
    # split at the cosine zeros (odd integers) where the sign alternates
    points = [z for z in range(1, int(s) + 1, 2) if z < s]
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        try:
            val, abserr = quad(lambda z: math.exp(z * z) * math.cos(0.5 * math.pi * z),
                               0.0, s, points=points or None, limit=400,
                               epsabs=0.0, epsrel=epsrel)
        except Warning as w:
            raise QuadratureFailureError(str(w)) from None
    if abserr > 100.0 * epsrel * max(abs(val), 1e-300):
        raise QuadratureFailureError(
            f"quadrature error {abserr:.3g} too large for value {val:.3g}")
    return val / s


def nussbaum_property_scan(s_points, epsrel: float = 1e-10):
    """[(s, mean integral)] over increasing positive s values."""
    pts = list(s_points)
    if not pts or any(s <= 0 for s in pts) or any(b <= a for a, b in zip(pts, pts[1:])):
        raise ValueError("s_points must be positive and strictly increasing")
    return [(float(s), nussbaum_mean_integral(float(s), epsrel)) for s in pts]


@dataclass
class VxMonitorConfig:
    lam: float = 0.1          # 1/s exponential weight
    rho_min: float = 1e-6     # assumed bounds on the time-varying weight
    rho_max: float = 1.0
    ceiling: float = 1e6      # boundedness flag threshold

    def __post_init__(self):
        if not self.lam > 0.0:
            raise ValueError("lam must be positive")
        if not 0.0 < self.rho_min <= self.rho_max:
            raise ValueError("need 0 < rho_min <= rho_max")


@dataclass
class VxReport:
    t: np.ndarray
    vx: np.ndarray            # V_X(0, t) series
    max_abs: float
    bounded: bool
    rho_empirical_min: float
    rho_empirical_max: float
    rho_in_bounds: bool


def vx_monitor(t, chi, rho, cfg: VxMonitorConfig) -> VxReport:
    """Evaluate V_X(0, t) = int_0^t (rho*N(X)*dX/dt - dX/dt) e^(lam (tau-t)) dtau.

    Trapezoidal in time via the stable recurrence
    V(t_{k+1}) = e^(-lam h) V(t_k) + h/2 (e^(-lam h) w_k + w_{k+1}).
    The X rate comes from central differences of the chi history.
    """
    t = np.asarray(t, dtype=float)
    chi = np.asarray(chi, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if not (t.shape == chi.shape == rho.shape) or t.ndim != 1:
        raise MisalignedHistoriesError("t, chi and rho must be equal-length 1-D")
    if t.size < 3:
        raise MisalignedHistoriesError("need at least 3 samples")
    chi_dot = np.gradient(chi, t)
    nvals = np.array([nussbaum(c) for c in chi])
    w = rho * nvals * chi_dot - chi_dot
    vx = np.empty_like(t)
    vx[0] = 0.0
    for i in range(1, t.size):
        h = t[i] - t[i - 1]
        decay = math.exp(-cfg.lam * h)
        vx[i] = decay * vx[i - 1] + 0.5 * h * (decay * w[i - 1] + w[i])
    max_abs = float(np.abs(vx).max())
    rmin, rmax = float(rho.min()), float(rho.max())
    return VxReport(
        t=t, vx=vx, max_abs=max_abs, bounded=max_abs < cfg.ceiling,
        rho_empirical_min=rmin, rho_empirical_max=rmax,
        rho_in_bounds=cfg.rho_min <= rmin and rmax <= cfg.rho_max)


def vx_monitor_from_log(log, cfg: VxMonitorConfig) -> VxReport:
    """Closed-loop form: rho(t) is the smooth-saturation slope at u(t).

    That slope tends to zero in deep saturation, so the lemma's rho_min > 0
    hypothesis may not hold empirically; the report carries the measured
    range rather than asserting it.
    """
    rho = np.array([smooth_sat(u)[1] for u in log.u])
    return vx_monitor(log.t, log.chi_n, rho, cfg)
