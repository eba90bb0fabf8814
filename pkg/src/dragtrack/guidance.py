"""Nussbaum-gain saturated drag-tracking guidance.

The physical command is the bank angle magnitude sigma in [0, 180] deg; the
plant feels cos(sigma) = sat(u) where u is a first-order filter state. The
control design works with the smooth surrogate g(u) = tanh(u): a virtual
target g* for g(u) is computed from output feedback (x0, x1, xhat2), and an
auxiliary signal drives the filter through a Nussbaum gain N(X) so that the
loop survives the vanishing slope of tanh in deep saturation without ever
inverting it.

Gain-sign bookkeeping for the auxiliary signal relies on partial derivatives
of g*; the x0 and xhat2 partials are analytic, while the x1 and explicit-time
partials are taken by central finite differences (drag enters f and g0 both
directly and through the lift scaling, and time enters through the reference
schedule). Inside the clamp's flat region all partials are zero.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .dragmodel import G0_FLOOR, DragKinematics, GZeroSingularError, f_g0_scalar, p_scalar
from .observer import ObserverGains, ObserverState, observer_rates
from .reference import _ref_eval

# controller-level status codes shared with the simulation kernel
CTRL_OK = 0
CTRL_NUSSBAUM_OVERFLOW = 1
CTRL_G0_ZERO = 2

# e^(X^2) overflows IEEE doubles just past |X| ~ 26.6
CHI_OVERFLOW = 26.0

# finite-difference steps: 1e-4 of the local drag scale / 1e-4 s
FD_REL = 1e-4
FD_DT = 1e-4

# partials of g* fade to zero over the last band before the clamp boundary so
# the auxiliary signal stays continuous when the command rides the clamp
PARTIAL_FADE = 0.05

# layout of the controller output buffer (rates + per-step diagnostics)
CTRL_SIGMA = 0
CTRL_SAT_U = 1
CTRL_DU = 2
CTRL_DCHI = 3
CTRL_DX0 = 4
CTRL_DXH1 = 5
CTRL_DXH2 = 6
CTRL_DSTAR = 7
CTRL_DSTAR_DOT = 8
CTRL_DSTAR_DDOT = 9
CTRL_X1 = 10
CTRL_P = 11
CTRL_F = 12
CTRL_G0 = 13
CTRL_G_U = 14
CTRL_GSTAR = 15
CTRL_GSTAR_RAW = 16
CTRL_BIG_G = 17
CTRL_UBAR = 18
CTRL_NUSS = 19
CTRL_FLOORED = 20
CTRL_DGS_DT = 21
CTRL_DGS_DX0 = 22
CTRL_DGS_DX1 = 23
CTRL_DGS_DXH2 = 24
CTRL_NOUT = 25


class NussbaumOverflowError(OverflowError):
    """exp(X^2) left the double range; the Nussbaum argument lost boundedness."""


class NonFiniteControlError(RuntimeError):
    """A controller intermediate went NaN/Inf."""


@dataclass(frozen=True)
class GuidanceGains:
    alpha1: float = 3.0
    alpha2: float = 3.0
    alpha3: float = 1.0
    eps0: float = 6.5     # s
    tau: float = 1.0      # s, command filter time constant
    gamma_x: float = 5e-4
    k: float = 1.0
    # below this |g0| the command is degenerate-saturated: g* partials zero
    g0_floor: float = G0_FLOOR
    # envelope on the auxiliary signal; bounds the Nussbaum-argument slew rate
    # (|dX/dt| <= 2*gamma_x*ubar_max) during out-of-domain transients
    ubar_max: float = 30.0
    # False drops the drag-error integral channel (the ablated baseline law)
    integral_enabled: bool = True

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "eps0", "tau", "gamma_x", "k", "g0_floor",
                     "ubar_max"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"GuidanceGains.{name} must be positive")
        if self.integral_enabled:
            if not self.alpha3 > 0.0:
                raise ValueError("GuidanceGains.alpha3 must be positive")
            if not self.alpha1 * self.alpha2 > self.alpha3:
                raise ValueError(
                    "Routh condition failed: need alpha1*alpha2 > alpha3 for a "
                    "Hurwitz error design (s^3 + a1 s^2 + a2 s + a3)")

    @property
    def alpha3_effective(self) -> float:
        return self.alpha3 if self.integral_enabled else 0.0


@dataclass
class GuidanceState:
    u: float = 0.0       # filter state; sat(u) = cos(sigma)
    chi_n: float = 0.0   # Nussbaum argument
    x0: float = 0.0      # integral of the drag error, m/s
    observer: ObserverState = field(default_factory=ObserverState)


@dataclass
class GuidanceDiagnostics:
    sigma: float
    sat_u: float
    d_star: float
    d_star_dot: float
    d_star_ddot: float
    x1: float
    p: float
    f: float
    g0: float
    g_u: float
    gstar: float
    gstar_raw: float
    big_g: float
    ubar: float
    nussbaum: float
    g0_floored: bool


@dataclass(frozen=True)
class GStarPartials:
    d_t: float
    d_x0: float
    d_x1: float
    d_xhat2: float


@njit(cache=True)
def smooth_sat_scalar(u):
    g = math.tanh(u)
    if abs(u) > 350.0:
        dg = 0.0
    else:
        sech = 1.0 / math.cosh(u)
        dg = sech * sech  # == 4 / (e^u + e^-u)^2
    return g, dg


def smooth_sat(u: float):
    """(tanh(u), d tanh/du); the slope lies in (0, 1] and peaks at u = 0."""
    return smooth_sat_scalar(u)


@njit(cache=True)
def nussbaum_scalar(chi):
    return math.exp(chi * chi) * math.cos(0.5 * math.pi * chi)


def nussbaum(chi: float) -> float:
    """N(X) = exp(X^2) * cos(pi X / 2), guarded against exponent overflow."""
    if abs(chi) > CHI_OVERFLOW:
        raise NussbaumOverflowError(f"|X| = {abs(chi):.3g} exceeds the overflow guard")
    return nussbaum_scalar(chi)


@njit(cache=True)
def _g0_inv(g0):
    mag = abs(g0)
    if mag < 1e-300:
        mag = 1e-300
    if g0 < 0.0:
        return -1.0 / mag
    return 1.0 / mag


@njit(cache=True)
def _gstar_raw(x0, x1, xh2, f, g0inv, d_star_ddot, a1, a2, a3, eps0):
    num = (-f + d_star_ddot
           - (a3 / eps0 ** 3) * x0
           - (a2 / eps0 ** 2) * x1
           - (a1 / eps0) * xh2)
    return num * g0inv


def virtual_control(x0: float, x1: float, xhat2: float, f: float, g0: float,
                    d_star_ddot: float, gains: GuidanceGains):
    """(clamped g*, pre-clamp g*). Raises GZeroSingularError when g0 == 0."""
    if g0 == 0.0:
        raise GZeroSingularError("g0 is exactly zero; virtual control undefined")
    raw = _gstar_raw(x0, x1, xhat2, f, _g0_inv(g0), d_star_ddot,
                     gains.alpha1, gains.alpha2, gains.alpha3_effective, gains.eps0)
    return min(max(raw, -1.0), 1.0), raw


def g_term(x1: float, d: float, partials: GStarPartials, g0: float, g_tilde: float,
           p_val: float, xhat2_dot: float) -> float:
    """Damping/feedforward collection G(D, t) entering the auxiliary control."""
    return (0.5 * g0 * g0 * g_tilde
            - partials.d_t
            - partials.d_x0 * x1
            - partials.d_x1 * p_val
            + 0.5 * (g_tilde * partials.d_x1 * d) ** 2
            - partials.d_xhat2 * xhat2_dot)


@njit(cache=True)
def controller_rates(t, u, chi_n, x0, xh1, xh2,
                     d, v, gamma, g, r, lift, hs,
                     rd, rdd, rddd, rh,
                     a1, a2, a3, eps0, tau, gx, k,
                     h1, h2, eps, g0_floor, ubar_max, out):
    """One controller evaluation: state rates plus diagnostics into `out`.

    Reference arrays (rd, rdd, rddd) are sampled on a uniform grid of spacing
    rh; a single-sample profile freezes the reference, which also zeroes the
    explicit-time partial of g*.
    """
    if chi_n * chi_n > CHI_OVERFLOW * CHI_OVERFLOW:
        return CTRL_NUSSBAUM_OVERFLOW
    nuss = math.exp(chi_n * chi_n) * math.cos(0.5 * math.pi * chi_n)

    ds, dsd, dsdd = _ref_eval(t, rd, rdd, rddd, rh)
    x1 = d - ds
    g_u, dg_u = smooth_sat_scalar(u)
    p = p_scalar(d, v, gamma, g, 0.0, hs)
    f, g0 = f_g0_scalar(d, v, gamma, g, r, lift, 0.0, 0.0, hs)
    if g0 == 0.0:
        return CTRL_G0_ZERO
    floored = 1.0 if abs(g0) < g0_floor else 0.0
    g0inv = _g0_inv(g0)
    gstar_raw = _gstar_raw(x0, x1, xh2, f, g0inv, dsdd, a1, a2, a3, eps0)
    gstar = min(max(gstar_raw, -1.0), 1.0)

    dxh1, dxh2 = observer_rates(xh1, xh2, x1, f, g0, g_u, dsdd, h1, h2, eps)

    fade = (1.0 - abs(gstar_raw)) / PARTIAL_FADE
    if fade > 1.0:
        fade = 1.0
    if fade <= 0.0 or floored == 1.0:
        # clamp active or g0 below its invertibility floor: the commanded
        # saturation level is flat in the states, so all partials are zero
        dgs_dt = 0.0
        dgs_dx0 = 0.0
        dgs_dx1 = 0.0
        dgs_dxh2 = 0.0
    else:
        dgs_dx0 = -(a3 / eps0 ** 3) * g0inv
        dgs_dxh2 = -(a1 / eps0) * g0inv
        # drag perturbation: lift scales with drag (both proportional to rho)
        dd = FD_REL * max(d, 1e-6)
        dp = d + dd
        dm = d - dd
        fp, g0p = f_g0_scalar(dp, v, gamma, g, r, lift * dp / d, 0.0, 0.0, hs)
        fm, g0m = f_g0_scalar(dm, v, gamma, g, r, lift * dm / d, 0.0, 0.0, hs)
        gsp = _gstar_raw(x0, x1 + dd, xh2, fp, _g0_inv(g0p), dsdd,
                         a1, a2, a3, eps0)
        gsm = _gstar_raw(x0, x1 - dd, xh2, fm, _g0_inv(g0m), dsdd,
                         a1, a2, a3, eps0)
        dgs_dx1 = (gsp - gsm) / (2.0 * dd)
        # explicit time: reference triple moves, x0/x1/xhat2 held
        dsp, _, dsddp = _ref_eval(t + FD_DT, rd, rdd, rddd, rh)
        dsm, _, dsddm = _ref_eval(t - FD_DT, rd, rdd, rddd, rh)
        dtp = max(x1 + dsp, 1e-12)
        dtm = max(x1 + dsm, 1e-12)
        ftp, g0tp = f_g0_scalar(dtp, v, gamma, g, r, lift * dtp / d, 0.0, 0.0, hs)
        ftm, g0tm = f_g0_scalar(dtm, v, gamma, g, r, lift * dtm / d, 0.0, 0.0, hs)
        gstp = _gstar_raw(x0, x1, xh2, ftp, _g0_inv(g0tp), dsddp,
                          a1, a2, a3, eps0)
        gstm = _gstar_raw(x0, x1, xh2, ftm, _g0_inv(g0tm), dsddm,
                          a1, a2, a3, eps0)
        dgs_dt = (gstp - gstm) / (2.0 * FD_DT)
        if fade < 1.0:
            dgs_dt *= fade
            dgs_dx0 *= fade
            dgs_dx1 *= fade
            dgs_dxh2 *= fade

    gtil = g_u - gstar
    big_g = (0.5 * g0 * g0 * gtil
             - dgs_dt - dgs_dx0 * x1 - dgs_dx1 * p
             + 0.5 * (gtil * dgs_dx1 * d) ** 2
             - dgs_dxh2 * dxh2)
    ubar = (dg_u / tau) * u - big_g - k * gtil
    ubar = min(max(ubar, -ubar_max), ubar_max)
    uc = tau * nuss * ubar
    du = (-u + uc) / tau
    dchi = gx * ubar * gtil
    sat_u = min(max(u, -1.0), 1.0)

    out[CTRL_SIGMA] = math.acos(sat_u)
    out[CTRL_SAT_U] = sat_u
    out[CTRL_DU] = du
    out[CTRL_DCHI] = dchi
    out[CTRL_DX0] = x1
    out[CTRL_DXH1] = dxh1
    out[CTRL_DXH2] = dxh2
    out[CTRL_DSTAR] = ds
    out[CTRL_DSTAR_DOT] = dsd
    out[CTRL_DSTAR_DDOT] = dsdd
    out[CTRL_X1] = x1
    out[CTRL_P] = p
    out[CTRL_F] = f
    out[CTRL_G0] = g0
    out[CTRL_G_U] = g_u
    out[CTRL_GSTAR] = gstar
    out[CTRL_GSTAR_RAW] = gstar_raw
    out[CTRL_BIG_G] = big_g
    out[CTRL_UBAR] = ubar
    out[CTRL_NUSS] = nuss
    out[CTRL_FLOORED] = floored
    out[CTRL_DGS_DT] = dgs_dt
    out[CTRL_DGS_DX0] = dgs_dx0
    out[CTRL_DGS_DX1] = dgs_dx1
    out[CTRL_DGS_DXH2] = dgs_dxh2
    return CTRL_OK


def _frozen_ref(triple):
    d_star, d_star_dot, d_star_ddot = triple
    return (np.array([float(d_star)]), np.array([float(d_star_dot)]),
            np.array([float(d_star_ddot)]), 1.0)


def guidance_step(gs: GuidanceState, measurements: DragKinematics, reference_triple,
                  guid: GuidanceGains, obs: ObserverGains, dt: float, hs: float):
    """Advance the controller memory one step with frozen measurements.

    Returns (sigma_cmd, updated GuidanceState, GuidanceDiagnostics). The
    command is issued from the entry-state filter value; the closed-loop
    simulator instead co-integrates these states with the plant.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    rd, rdd, rddd, rh = _frozen_ref(reference_triple)
    k = measurements
    a3 = guid.alpha3_effective

    def rates(tt, u, chi_n, x0, xh1, xh2, out):
        return controller_rates(
            tt, u, chi_n, x0, xh1, xh2,
            k.d, k.v, k.gamma, k.g, k.r, k.l, hs,
            rd, rdd, rddd, rh,
            guid.alpha1, guid.alpha2, a3, guid.eps0, guid.tau, guid.gamma_x,
            guid.k, obs.h1, obs.h2, obs.eps, guid.g0_floor, guid.ubar_max, out)

    y = np.array([gs.u, gs.chi_n, gs.x0, gs.observer.xhat1, gs.observer.xhat2])
    out = np.empty(CTRL_NOUT)
    stages = np.empty((4, 5))
    status = rates(0.0, *y, out)
    _raise_ctrl(status, out)
    diag = GuidanceDiagnostics(
        sigma=out[CTRL_SIGMA], sat_u=out[CTRL_SAT_U], d_star=out[CTRL_DSTAR],
        d_star_dot=out[CTRL_DSTAR_DOT], d_star_ddot=out[CTRL_DSTAR_DDOT],
        x1=out[CTRL_X1], p=out[CTRL_P], f=out[CTRL_F], g0=out[CTRL_G0],
        g_u=out[CTRL_G_U], gstar=out[CTRL_GSTAR], gstar_raw=out[CTRL_GSTAR_RAW],
        big_g=out[CTRL_BIG_G], ubar=out[CTRL_UBAR], nussbaum=out[CTRL_NUSS],
        g0_floored=bool(out[CTRL_FLOORED]))
    sigma_cmd = out[CTRL_SIGMA]

    stages[0] = out[CTRL_DU:CTRL_DXH2 + 1]
    for i, (frac, tstage) in enumerate(((0.5, 0.5 * dt), (0.5, 0.5 * dt), (1.0, dt))):
        ystage = y + frac * dt * stages[i]
        _raise_ctrl(rates(tstage, *ystage, out), out)
        stages[i + 1] = out[CTRL_DU:CTRL_DXH2 + 1]
    ynew = y + dt / 6.0 * (stages[0] + 2.0 * stages[1] + 2.0 * stages[2] + stages[3])
    if not np.all(np.isfinite(ynew)):
        raise NonFiniteControlError("controller state went non-finite")
    new_gs = GuidanceState(u=float(ynew[0]), chi_n=float(ynew[1]), x0=float(ynew[2]),
                           observer=ObserverState(float(ynew[3]), float(ynew[4])))
    return sigma_cmd, new_gs, diag


def _raise_ctrl(status, out):
    if status == CTRL_NUSSBAUM_OVERFLOW:
        raise NussbaumOverflowError("Nussbaum argument exceeded the overflow guard")
    if status == CTRL_G0_ZERO:
        raise GZeroSingularError("g0 is exactly zero; virtual control undefined")
    if status == CTRL_OK and not np.all(np.isfinite(out)):
        raise NonFiniteControlError("controller produced NaN/Inf")
