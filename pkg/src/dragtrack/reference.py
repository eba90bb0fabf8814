"""Reference drag profile: generation from a nominal open-loop run, plus lookup.

The profile is produced by integrating the undispersed plant under a
configured bank schedule and recording the drag acceleration together with
its analytic first and second time derivatives on a uniform time grid.
Closed-loop runs then track a profile that is feasible by construction.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .dragmodel import f_g0_scalar, p_scalar
from .dynamics import DOWNRANGE_SIGN, VehicleParams, VehicleState, plant_rates
from .environment import PlanetModel

_EVENT_TOL = 1e-3  # s, terminal-event bisection resolution


class NominalRunFailedError(RuntimeError):
    """The nominal run never reached the terminal condition within max_time."""


@dataclass
class ReferenceProfile:
    """Uniformly sampled (t, D*, dD*/dt, d2D*/dt2) with terminal metadata."""

    t: np.ndarray
    d_star: np.ndarray
    d_star_dot: np.ndarray
    d_star_ddot: np.ndarray
    # refined terminal point of the generating run (may exceed t[-1] by < dt)
    term_time: float = 0.0
    term_velocity: float = 0.0
    term_altitude: float = 0.0    # m
    term_downrange: float = 0.0   # m, travelled (positive)
    bank_deg: float = float("nan")

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.d_star = np.asarray(self.d_star, dtype=float)
        self.d_star_dot = np.asarray(self.d_star_dot, dtype=float)
        self.d_star_ddot = np.asarray(self.d_star_ddot, dtype=float)

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def validate(self):
        if self.t.size < 4:
            raise ValueError("reference profile needs at least 4 samples")
        steps = np.diff(self.t)
        if not np.all(steps > 0.0):
            raise ValueError("reference times must be strictly increasing")
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
            raise ValueError("reference grid must be uniform")
        if not np.all(self.d_star > 0.0):
            raise ValueError("reference drag must be positive at every sample")
        # stored slope must agree with finite differences of the samples
        fd = (self.d_star[2:] - self.d_star[:-2]) / (self.t[2:] - self.t[:-2])
        scale = np.abs(fd).max()
        if scale > 0.0:
            err = np.abs(self.d_star_dot[1:-1] - fd).max() / scale
            if err > 0.01:
                raise ValueError(f"stored d_star_dot inconsistent with samples ({err:.2%})")
        return self


@njit(cache=True)
def _ref_eval(t, d, dd, ddd, h):
    """Cubic Hermite for D*, linear for its derivatives; clamped hold at the ends."""
    n = d.shape[0]
    if t <= 0.0 or n == 1:
        return d[0], dd[0], ddd[0]
    x = t / h
    i = int(x)
    if i >= n - 1:
        return d[n - 1], dd[n - 1], ddd[n - 1]
    s = x - i
    s2 = s * s
    s3 = s2 * s
    h00 = 2.0 * s3 - 3.0 * s2 + 1.0
    h10 = s3 - 2.0 * s2 + s
    h01 = -2.0 * s3 + 3.0 * s2
    h11 = s3 - s2
    val = h00 * d[i] + h10 * h * dd[i] + h01 * d[i + 1] + h11 * h * dd[i + 1]
    vdot = dd[i] + s * (dd[i + 1] - dd[i])
    vddot = ddd[i] + s * (ddd[i + 1] - ddd[i])
    return val, vdot, vddot


def lookup(profile: ReferenceProfile, t: float):
    """(D*, dD*/dt, d2D*/dt2) at time t; holds the last sample for t > t_end."""
    return _ref_eval(t, profile.d_star, profile.d_star_dot, profile.d_star_ddot,
                     profile.dt)


@njit(cache=True)
def _bank_at(t, knot_t, knot_sigma):
    n = knot_t.shape[0]
    if t <= knot_t[0]:
        return knot_sigma[0]
    if t >= knot_t[n - 1]:
        return knot_sigma[n - 1]
    i = np.searchsorted(knot_t, t) - 1
    w = (t - knot_t[i]) / (knot_t[i + 1] - knot_t[i])
    return knot_sigma[i] + w * (knot_sigma[i + 1] - knot_sigma[i])


@njit(cache=True)
def _openloop_rates(t, y, mu, r0, hs, rho0, kl, kd, knot_t, knot_sigma, dy):
    r = y[0]
    v = y[3]
    gamma = y[4]
    rho = rho0 * math.exp(-(r - r0) / hs)
    g = mu / (r * r)
    q = rho * v * v
    lift = kl * q
    drag = kd * q
    sigma = _bank_at(t, knot_t, knot_sigma)
    dr, dphi, dtheta, dv, dgamma, dchi, ds = plant_rates(
        r, y[2], v, gamma, y[5], lift, drag, g, math.cos(sigma), math.sin(sigma), r0)
    dy[0] = dr
    dy[1] = dphi
    dy[2] = dtheta
    dy[3] = dv
    dy[4] = dgamma
    dy[5] = dchi
    dy[6] = ds
    return drag, lift, g


@njit(cache=True)
def _openloop_rk4(t, y, h, mu, r0, hs, rho0, kl, kd, kt, ks, yout, k1, k2, k3, k4, ytmp):
    _openloop_rates(t, y, mu, r0, hs, rho0, kl, kd, kt, ks, k1)
    for j in range(7):
        ytmp[j] = y[j] + 0.5 * h * k1[j]
    _openloop_rates(t + 0.5 * h, ytmp, mu, r0, hs, rho0, kl, kd, kt, ks, k2)
    for j in range(7):
        ytmp[j] = y[j] + 0.5 * h * k2[j]
    _openloop_rates(t + 0.5 * h, ytmp, mu, r0, hs, rho0, kl, kd, kt, ks, k3)
    for j in range(7):
        ytmp[j] = y[j] + h * k3[j]
    _openloop_rates(t + h, ytmp, mu, r0, hs, rho0, kl, kd, kt, ks, k4)
    for j in range(7):
        yout[j] = y[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])


@njit(cache=True)
def _openloop_kernel(y0, mu, r0, hs, rho0, kl, kd, kt, ks, dt, vf, hf, out):
    n_max = out.shape[0] - 1
    y = y0.copy()
    yprev = np.empty(7)
    ybis = np.empty(7)
    ytmp = np.empty(7)
    k1 = np.empty(7)
    k2 = np.empty(7)
    k3 = np.empty(7)
    k4 = np.empty(7)
    t = 0.0
    n = 0
    status = 2  # timeout unless an event fires
    for i in range(n_max):
        t = i * dt  # exact grid times (no accumulated roundoff)
        r, v, gamma = y[0], y[3], y[4]
        rho = rho0 * math.exp(-(r - r0) / hs)
        g = mu / (r * r)
        q = rho * v * v
        drag = kd * q
        lift = kl * q
        sigma = _bank_at(t, kt, ks)
        p = p_scalar(drag, v, gamma, g, 0.0, hs)
        f, g0 = f_g0_scalar(drag, v, gamma, g, r, lift, 0.0, 0.0, hs)
        out[n, 0] = t
        out[n, 1] = drag
        out[n, 2] = p
        out[n, 3] = f + g0 * math.cos(sigma)
        n += 1
        for j in range(7):
            yprev[j] = y[j]
        _openloop_rk4(t, yprev, dt, mu, r0, hs, rho0, kl, kd, kt, ks, y,
                      k1, k2, k3, k4, ytmp)
        t = (i + 1) * dt
        if y[3] <= vf or y[0] - r0 <= hf:
            # bisect the event time inside the last step
            lo = 0.0
            hi = dt
            while hi - lo > _EVENT_TOL:
                mid = 0.5 * (lo + hi)
                _openloop_rk4(t - dt, yprev, mid, mu, r0, hs, rho0, kl, kd, kt, ks,
                              ybis, k1, k2, k3, k4, ytmp)
                if ybis[3] <= vf or ybis[0] - r0 <= hf:
                    hi = mid
                else:
                    lo = mid
            _openloop_rk4(t - dt, yprev, hi, mu, r0, hs, rho0, kl, kd, kt, ks, y,
                          k1, k2, k3, k4, ytmp)
            t = t - dt + hi
            status = 0 if y[3] <= vf else 1
            break
    return status, n, t, y


def generate_reference(planet: PlanetModel, vehicle: VehicleParams,
                       initial: VehicleState, dt: float,
                       terminal_velocity: float, terminal_altitude: float,
                       max_time: float, bank=math.radians(50.0)) -> ReferenceProfile:
    """Integrate the zero-dispersion plant open-loop and record D*, dD*, d2D*.

    `bank` is a constant angle in radians, a callable t -> sigma(t) in
    radians, or a (times, sigmas) knot table interpolated linearly. The
    schedule must stay inside [0, pi].
    """
    if any((vehicle.d_cl, vehicle.d_cd, vehicle.d_m)):
        raise ValueError("reference generation requires zero dispersions")
    kt, ks = _bank_knots(bank, max_time)
    if np.any(ks < 0.0) or np.any(ks > math.pi):
        raise ValueError("bank schedule outside [0deg, 180deg]")
    kl, kd = vehicle.accel_factors()
    y0 = np.array(initial.as_array(), dtype=float)
    n_max = int(max_time / dt) + 2
    out = np.empty((n_max + 1, 4))
    status, n, t_term, y_term = _openloop_kernel(
        y0, planet.mu, planet.r0, planet.hs, planet.rho0, kl, kd, kt, ks,
        dt, terminal_velocity, terminal_altitude, out)
    if status == 2:
        raise NominalRunFailedError(
            f"nominal run hit max_time={max_time}s before any terminal condition")
    profile = ReferenceProfile(
        t=out[:n, 0].copy(),
        d_star=out[:n, 1].copy(),
        d_star_dot=out[:n, 2].copy(),
        d_star_ddot=out[:n, 3].copy(),
        term_time=float(t_term),
        term_velocity=float(y_term[3]),
        term_altitude=float(y_term[0] - planet.r0),
        term_downrange=float(DOWNRANGE_SIGN * y_term[6]),
        bank_deg=math.degrees(ks[0]) if ks.size == 1 or np.ptp(ks) == 0 else float("nan"),
    )
    return profile.validate()


def _bank_knots(bank, max_time):
    if callable(bank):
        kt = np.arange(0.0, max_time + 1.0, 1.0)
        ks = np.array([float(bank(tk)) for tk in kt])
    elif np.isscalar(bank):
        kt = np.array([0.0])
        ks = np.array([float(bank)])
    else:
        kt = np.asarray(bank[0], dtype=float)
        ks = np.asarray(bank[1], dtype=float)
        if kt.shape != ks.shape or kt.ndim != 1:
            raise ValueError("bank knot table must be two equal-length 1-D arrays")
    return kt, ks


_META_KEYS = ("term_time", "term_velocity", "term_altitude", "term_downrange", "bank_deg")


def save_csv(profile: ReferenceProfile, path):
    """Write the profile as CSV (t, d_star, d_star_dot, d_star_ddot) with
    '#'-prefixed metadata lines for the terminal summary."""
    meta = " ".join(f"{k}={getattr(profile, k):.10g}" for k in _META_KEYS)
    header = f"dragtrack reference profile\n{meta}\nt,d_star,d_star_dot,d_star_ddot"
    data = np.column_stack([profile.t, profile.d_star, profile.d_star_dot,
                            profile.d_star_ddot])
    np.savetxt(path, data, delimiter=",", header=header, fmt="%.12g")


def load_csv(path) -> ReferenceProfile:
    meta = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            for token in line[1:].split():
                if "=" in token:
                    key, _, val = token.partition("=")
                    if key in _META_KEYS:
                        meta[key] = float(val)
    data = np.loadtxt(path, delimiter=",")
    profile = ReferenceProfile(t=data[:, 0], d_star=data[:, 1],
                               d_star_dot=data[:, 2], d_star_ddot=data[:, 3], **meta)
    return profile.validate()
