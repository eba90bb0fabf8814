"""Fixed-step RK4 closed-loop simulation engine.

Plant, observer and controller memory form one 12-component state advanced
by classical RK4 with a common step. Terminal events (velocity floor,
altitude floor) are refined by bisection over the final step to 1e-3 s.
Every run is a pure function of its configuration: no global state, no RNG.
"""

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.optimize import nnls

from . import guidance as gd
from .dragmodel import GZeroSingularError
from .dynamics import DOWNRANGE_SIGN, VehicleParams, VehicleState, plant_rates
from .environment import DensityDispersion, PlanetModel
from .guidance import GuidanceGains, NussbaumOverflowError, controller_rates
from .observer import ObserverGains
from .reference import _EVENT_TOL, ReferenceProfile, lookup

# engine status codes
STATUS_VELOCITY = 0
STATUS_ALTITUDE = 1
STATUS_TIMEOUT = 2
STATUS_NONFINITE = 3
STATUS_NUSSBAUM = 4
STATUS_GZERO = 5
STATUS_NAMES = {
    STATUS_VELOCITY: "velocity",
    STATUS_ALTITUDE: "altitude",
    STATUS_TIMEOUT: "timeout",
    STATUS_NONFINITE: "nonfinite",
    STATUS_NUSSBAUM: "nussbaum-overflow",
    STATUS_GZERO: "g0-singular",
}

# parameter-vector layout for the jitted kernel
P_MU, P_R0, P_HS, P_RHO0E, P_KL, P_KD = 0, 1, 2, 3, 4, 5
P_A1, P_A2, P_A3, P_EPS0, P_TAU, P_GX, P_K = 6, 7, 8, 9, 10, 11, 12
P_H1, P_H2, P_EPS, P_G0FLOOR, P_UBARMAX = 13, 14, 15, 16, 17
P_DT, P_TMAX, P_VF, P_HF = 18, 19, 20, 21
NPARS = 22

# controller buffer extended with plant-side quantities
EXT_RHO = gd.CTRL_NOUT
EXT_DRAG = gd.CTRL_NOUT + 1
EXT_LIFT = gd.CTRL_NOUT + 2
NCTRL_EXT = gd.CTRL_NOUT + 3

LOG_COLUMNS = [
    "t", "r", "phi", "theta", "v", "gamma", "chi", "s",
    "u", "chi_n", "x0", "xhat1", "xhat2",
    "h", "sigma", "sat_u", "d_star", "d_star_dot", "d_star_ddot",
    "x1", "p", "f", "g0", "g_u", "gstar", "gstar_pre", "big_g", "ubar",
    "nussbaum", "g0_floored", "rho", "drag", "lift",
]
_COL = {name: i for i, name in enumerate(LOG_COLUMNS)}
NCOLS = len(LOG_COLUMNS)

# extrema accumulator layout
X_MAXCHI, X_SIGMIN, X_SIGMAX, X_MAXGSTAR, X_FLOORED, X_MAXUBAR, X_MAXU = range(7)
NEXTR = 7


class SimTimeoutError(RuntimeError):
    """Integration reached max_time before any terminal event."""


class NonFiniteStateError(RuntimeError):
    """The combined state left the representable range."""


@dataclass
class SimConfig:
    planet: PlanetModel
    vehicle: VehicleParams
    obs_gains: ObserverGains
    guid_gains: GuidanceGains
    reference: ReferenceProfile
    initial: VehicleState
    density_disp: DensityDispersion = DensityDispersion(0.0)
    dt: float = 0.01              # s
    max_time: float = 1200.0      # s
    terminal_velocity: float = 503.0   # m/s
    terminal_altitude: float = 2000.0  # m, safety floor below the 10 km target

    def validate(self):
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        bound = min(self.obs_gains.eps, self.guid_gains.eps0, self.guid_gains.tau) / 10.0
        if self.dt > bound * (1.0 + 1e-12):
            raise ValueError(
                f"dt={self.dt} violates dt <= min(eps, eps0, tau)/10 = {bound:.4g}")
        if not (self.terminal_velocity > 0.0 and self.terminal_altitude > 0.0
                and self.max_time > 0.0):
            raise ValueError("terminal conditions and max_time must be positive")
        return self

    def pars(self) -> np.ndarray:
        kl, kd = self.vehicle.accel_factors()
        p = np.empty(NPARS)
        p[P_MU] = self.planet.mu
        p[P_R0] = self.planet.r0
        p[P_HS] = self.planet.hs
        p[P_RHO0E] = self.planet.rho0 * (1.0 + self.density_disp.frac)
        p[P_KL] = kl
        p[P_KD] = kd
        p[P_A1] = self.guid_gains.alpha1
        p[P_A2] = self.guid_gains.alpha2
        p[P_A3] = self.guid_gains.alpha3_effective
        p[P_EPS0] = self.guid_gains.eps0
        p[P_TAU] = self.guid_gains.tau
        p[P_GX] = self.guid_gains.gamma_x
        p[P_K] = self.guid_gains.k
        p[P_H1] = self.obs_gains.h1
        p[P_H2] = self.obs_gains.h2
        p[P_EPS] = self.obs_gains.eps
        p[P_G0FLOOR] = self.guid_gains.g0_floor
        p[P_UBARMAX] = self.guid_gains.ubar_max
        p[P_DT] = self.dt
        p[P_TMAX] = self.max_time
        p[P_VF] = self.terminal_velocity
        p[P_HF] = self.terminal_altitude
        return p


def rk4_step(f, t, y, dt):
    """Classical 4th-order Runge-Kutta update; f(t, y) -> dy/dt."""
    k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit(cache=True)
def _combined_rates(t, y, pars, rd, rdd, rddd, rh, dy, ctrl):
    r = y[0]
    v = y[3]
    gamma = y[4]
    rho = pars[P_RHO0E] * math.exp(-(r - pars[P_R0]) / pars[P_HS])
    g = pars[P_MU] / (r * r)
    q = rho * v * v
    lift = pars[P_KL] * q
    drag = pars[P_KD] * q
    st = controller_rates(
        t, y[7], y[8], y[9], y[10], y[11],
        drag, v, gamma, g, r, lift, pars[P_HS],
        rd, rdd, rddd, rh,
        pars[P_A1], pars[P_A2], pars[P_A3], pars[P_EPS0], pars[P_TAU],
        pars[P_GX], pars[P_K], pars[P_H1], pars[P_H2], pars[P_EPS],
        pars[P_G0FLOOR], pars[P_UBARMAX], ctrl)
    if st != gd.CTRL_OK:
        return st
    sat_u = ctrl[gd.CTRL_SAT_U]
    sin_sigma = math.sqrt(max(1.0 - sat_u * sat_u, 0.0))
    dr, dphi, dtheta, dv, dgamma, dchi, ds = plant_rates(
        r, y[2], v, gamma, y[5], lift, drag, g, sat_u, sin_sigma, pars[P_R0])
    dy[0] = dr
    dy[1] = dphi
    dy[2] = dtheta
    dy[3] = dv
    dy[4] = dgamma
    dy[5] = dchi
    dy[6] = ds
    dy[7] = ctrl[gd.CTRL_DU]
    dy[8] = ctrl[gd.CTRL_DCHI]
    dy[9] = ctrl[gd.CTRL_DX0]
    dy[10] = ctrl[gd.CTRL_DXH1]
    dy[11] = ctrl[gd.CTRL_DXH2]
    ctrl[EXT_RHO] = rho
    ctrl[EXT_DRAG] = drag
    ctrl[EXT_LIFT] = lift
    return gd.CTRL_OK


@njit(cache=True)
def _rk4_into(t, y, h, pars, rd, rdd, rddd, rh, yout, k1, k2, k3, k4, ytmp, c1, cs):
    st = _combined_rates(t, y, pars, rd, rdd, rddd, rh, k1, c1)
    if st != 0:
        return st
    for j in range(12):
        ytmp[j] = y[j] + 0.5 * h * k1[j]
    st = _combined_rates(t + 0.5 * h, ytmp, pars, rd, rdd, rddd, rh, k2, cs)
    if st != 0:
        return st
    for j in range(12):
        ytmp[j] = y[j] + 0.5 * h * k2[j]
    st = _combined_rates(t + 0.5 * h, ytmp, pars, rd, rdd, rddd, rh, k3, cs)
    if st != 0:
        return st
    for j in range(12):
        ytmp[j] = y[j] + h * k3[j]
    st = _combined_rates(t + h, ytmp, pars, rd, rdd, rddd, rh, k4, cs)
    if st != 0:
        return st
    for j in range(12):
        yout[j] = y[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
    return 0


@njit(cache=True)
def _log_row(row, t, y, ctrl, r0):
    row[0] = t
    for j in range(12):
        row[1 + j] = y[j]
    row[13] = y[0] - r0
    row[14] = ctrl[gd.CTRL_SIGMA]
    row[15] = ctrl[gd.CTRL_SAT_U]
    row[16] = ctrl[gd.CTRL_DSTAR]
    row[17] = ctrl[gd.CTRL_DSTAR_DOT]
    row[18] = ctrl[gd.CTRL_DSTAR_DDOT]
    row[19] = ctrl[gd.CTRL_X1]
    row[20] = ctrl[gd.CTRL_P]
    row[21] = ctrl[gd.CTRL_F]
    row[22] = ctrl[gd.CTRL_G0]
    row[23] = ctrl[gd.CTRL_G_U]
    row[24] = ctrl[gd.CTRL_GSTAR]
    row[25] = ctrl[gd.CTRL_GSTAR_RAW]
    row[26] = ctrl[gd.CTRL_BIG_G]
    row[27] = ctrl[gd.CTRL_UBAR]
    row[28] = ctrl[gd.CTRL_NUSS]
    row[29] = ctrl[gd.CTRL_FLOORED]
    row[30] = ctrl[EXT_RHO]
    row[31] = ctrl[EXT_DRAG]
    row[32] = ctrl[EXT_LIFT]


@njit(cache=True)
def _update_extrema(extr, y, ctrl):
    if abs(y[8]) > extr[X_MAXCHI]:
        extr[X_MAXCHI] = abs(y[8])
    sig = ctrl[gd.CTRL_SIGMA]
    if sig < extr[X_SIGMIN]:
        extr[X_SIGMIN] = sig
    if sig > extr[X_SIGMAX]:
        extr[X_SIGMAX] = sig
    if abs(ctrl[gd.CTRL_GSTAR_RAW]) > extr[X_MAXGSTAR]:
        extr[X_MAXGSTAR] = abs(ctrl[gd.CTRL_GSTAR_RAW])
    extr[X_FLOORED] += ctrl[gd.CTRL_FLOORED]
    if abs(ctrl[gd.CTRL_UBAR]) > extr[X_MAXUBAR]:
        extr[X_MAXUBAR] = abs(ctrl[gd.CTRL_UBAR])
    if abs(y[7]) > extr[X_MAXU]:
        extr[X_MAXU] = abs(y[7])


@njit(cache=True)
def _run_kernel(y0, pars, rd, rdd, rddd, rh, log, log_on):
    dt = pars[P_DT]
    vf = pars[P_VF]
    hf = pars[P_HF]
    r0 = pars[P_R0]
    n_max = int(pars[P_TMAX] / dt) + 1

    y = y0.copy()
    yprev = np.empty(12)
    ybis = np.empty(12)
    ytmp = np.empty(12)
    k1 = np.empty(12)
    k2 = np.empty(12)
    k3 = np.empty(12)
    k4 = np.empty(12)
    c1 = np.empty(NCTRL_EXT)
    cs = np.empty(NCTRL_EXT)

    extr = np.zeros(NEXTR)
    extr[X_SIGMIN] = 10.0
    extr[X_SIGMAX] = -10.0

    t = 0.0
    n = 0
    status = STATUS_TIMEOUT
    for i in range(n_max):
        t = i * dt  # exact grid times (no accumulated roundoff)
        for j in range(12):
            yprev[j] = y[j]
        st = _rk4_into(t, yprev, dt, pars, rd, rdd, rddd, rh, y,
                       k1, k2, k3, k4, ytmp, c1, cs)
        if st != 0:
            status = STATUS_NUSSBAUM if st == gd.CTRL_NUSSBAUM_OVERFLOW else STATUS_GZERO
            for j in range(12):
                y[j] = yprev[j]
            break
        if log_on:
            _log_row(log[n], t, yprev, c1, r0)
        n += 1
        _update_extrema(extr, yprev, c1)

        finite = True
        for j in range(12):
            if not math.isfinite(y[j]):
                finite = False
        if not finite:
            status = STATUS_NONFINITE
            break
        t = (i + 1) * dt
        if y[3] <= vf or y[0] - r0 <= hf:
            lo = 0.0
            hi = dt
            while hi - lo > _EVENT_TOL:
                mid = 0.5 * (lo + hi)
                st = _rk4_into(t - dt, yprev, mid, pars, rd, rdd, rddd, rh, ybis,
                               k1, k2, k3, k4, ytmp, c1, cs)
                if st != 0:
                    break
                if ybis[3] <= vf or ybis[0] - r0 <= hf:
                    hi = mid
                else:
                    lo = mid
            _rk4_into(t - dt, yprev, hi, pars, rd, rdd, rddd, rh, y,
                      k1, k2, k3, k4, ytmp, c1, cs)
            t = t - dt + hi
            status = STATUS_VELOCITY if y[3] <= vf else STATUS_ALTITUDE
            break

    # terminal (or abort) diagnostic row at the final state
    st = _combined_rates(t, y, pars, rd, rdd, rddd, rh, k1, c1)
    if st == 0:
        if log_on:
            _log_row(log[n], t, y, c1, r0)
        n += 1
        _update_extrema(extr, y, c1)
    return status, n, t, y, extr


@dataclass
class TerminalSummary:
    status: str
    time: float
    velocity: float       # m/s
    altitude: float       # m
    downrange: float      # m, travelled (positive)
    gamma: float          # rad
    max_abs_chi_n: float
    sigma_min: float      # rad
    sigma_max: float      # rad
    max_abs_gstar_pre: float
    g0_floored_steps: int
    max_abs_ubar: float
    max_abs_u: float


class TrajectoryLog:
    """Column-addressable per-step history plus one terminal summary.

    Rows are uniformly spaced except the final event-refined row. Columns are
    listed in LOG_COLUMNS; access as attributes (log.v, log.d_star, ...).
    """

    def __init__(self, data: np.ndarray, terminal: TerminalSummary, dt: float):
        self.data = data
        self.terminal = terminal
        self.dt = dt

    def __getattr__(self, name):
        idx = _COL.get(name)
        if idx is None:
            raise AttributeError(name)
        return self.data[:, idx]

    def __len__(self):
        return self.data.shape[0]

    @property
    def n_uniform(self) -> int:
        """Number of leading rows on the uniform dt grid."""
        n = self.data.shape[0]
        if n >= 2 and not math.isclose(self.data[n - 1, 0] - self.data[n - 2, 0],
                                       self.dt, rel_tol=1e-9, abs_tol=1e-12):
            return n - 1
        return n

    def drag_residual(self) -> np.ndarray:
        """Measured d2D/dt2 minus the tanh-model (f + g0*g(u)), NaN-padded.

        The measurement is a 5-point second central difference of the logged
        drag over the uniform grid.
        """
        out = np.full(len(self), np.nan)
        nu = self.n_uniform
        if nu >= 5:
            d = self.data[:nu, _COL["drag"]]
            dd = (-d[4:] + 16.0 * d[3:-1] - 30.0 * d[2:-2]
                  + 16.0 * d[1:-3] - d[:-4]) / (12.0 * self.dt ** 2)
            model = (self.data[2:nu - 2, _COL["f"]]
                     + self.data[2:nu - 2, _COL["g0"]] * self.data[2:nu - 2, _COL["g_u"]])
            out[2:nu - 2] = dd - model
        return out

    def to_csv(self, path):
        resid = self.drag_residual()
        header = ",".join(LOG_COLUMNS + ["delta_s_resid"])
        np.savetxt(path, np.column_stack([self.data, resid]),
                   delimiter=",", header=header, comments="", fmt="%.10g")


def initial_guidance_vector(config: SimConfig) -> np.ndarray:
    """Combined initial state: plant per config, filter/Nussbaum/integral at
    zero, observer seeded with the measured drag error and zero rate."""
    st = config.initial
    h0 = st.r - config.planet.r0
    rho = config.planet.rho0 * (1.0 + config.density_disp.frac) * math.exp(-h0 / config.planet.hs)
    _, kd = config.vehicle.accel_factors()
    d0 = kd * rho * st.v * st.v
    d_star0, _, _ = lookup(config.reference, 0.0)
    x1_0 = d0 - d_star0
    return np.array(st.as_array() + [0.0, 0.0, 0.0, x1_0, 0.0])


def run_trajectory(config: SimConfig, log: bool = True, strict: bool = True) -> TrajectoryLog:
    """Integrate one closed-loop run to its terminal event.

    With strict=True, endings other than the velocity/altitude events raise
    (SimTimeoutError, NonFiniteStateError, NussbaumOverflowError,
    GZeroSingularError) with the partial log attached as exc.log.
    """
    config.validate()
    pars = config.pars()
    ref = config.reference
    y0 = initial_guidance_vector(config)
    n_max = int(config.max_time / config.dt) + 3
    buf = np.empty((n_max, NCOLS)) if log else np.empty((1, NCOLS))
    status, n, t_end, y_end, extr = _run_kernel(
        y0, pars, ref.d_star, ref.d_star_dot, ref.d_star_ddot, ref.dt,
        buf, log)
    terminal = TerminalSummary(
        status=STATUS_NAMES[status],
        time=float(t_end),
        velocity=float(y_end[3]),
        altitude=float(y_end[0] - config.planet.r0),
        downrange=float(DOWNRANGE_SIGN * y_end[6]),
        gamma=float(y_end[4]),
        max_abs_chi_n=float(extr[X_MAXCHI]),
        sigma_min=float(extr[X_SIGMIN]),
        sigma_max=float(extr[X_SIGMAX]),
        max_abs_gstar_pre=float(extr[X_MAXGSTAR]),
        g0_floored_steps=int(extr[X_FLOORED]),
        max_abs_ubar=float(extr[X_MAXUBAR]),
        max_abs_u=float(extr[X_MAXU]),
    )
    result = TrajectoryLog(buf[:n].copy() if log else buf[:0], terminal, config.dt)
    if strict and status not in (STATUS_VELOCITY, STATUS_ALTITUDE):
        exc_type = {
            STATUS_TIMEOUT: SimTimeoutError,
            STATUS_NONFINITE: NonFiniteStateError,
            STATUS_NUSSBAUM: NussbaumOverflowError,
            STATUS_GZERO: GZeroSingularError,
        }[status]
        exc = exc_type(f"run ended with status '{STATUS_NAMES[status]}' at t={t_end:.2f}s")
        exc.log = result
        raise exc
    return result


def error_metrics(log: TrajectoryLog, target_downrange_km: float,
                  target_altitude_km: float):
    """(downrange error, altitude error) in signed km against the targets."""
    ddr = log.terminal.downrange / 1e3 - target_downrange_km
    dalt = log.terminal.altitude / 1e3 - target_altitude_km
    return ddr, dalt


@dataclass
class MonitorReport:
    l0: float
    l1: float
    d: float
    violation_fraction: float
    max_abs_residual: float
    n_samples: int


def residual_monitor(log: TrajectoryLog) -> MonitorReport:
    """Fit |residual| <= l0*|x0| + l1*|x1| + d by nonnegative least squares.

    The residual is the measured drag second derivative minus the tanh-model
    prediction; violations are counted against the fitted envelope inflated
    by a 1.1 safety factor.
    """
    resid = log.drag_residual()
    sel = np.isfinite(resid)
    if sel.sum() < 10:
        raise ValueError("insufficient samples for the residual monitor")
    r = np.abs(resid[sel])
    a = np.column_stack([np.abs(log.x0[sel]), np.abs(log.x1[sel]), np.ones(sel.sum())])
    coef, _ = nnls(a, r)
    envelope = 1.1 * (a @ coef)
    violations = float(np.mean(r > envelope))
    return MonitorReport(l0=float(coef[0]), l1=float(coef[1]), d=float(coef[2]),
                         violation_fraction=violations,
                         max_abs_residual=float(r.max()), n_samples=int(sel.sum()))
