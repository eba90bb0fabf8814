import math

import numpy as np
import pytest

from dragtrack import guidance as gd
from dragtrack.dragmodel import DragKinematics, GZeroSingularError, f_g0_terms, p_term
from dragtrack.environment import MARS
from dragtrack.guidance import (GStarPartials, GuidanceGains, GuidanceState,
                                NussbaumOverflowError, g_term, guidance_step,
                                nussbaum, smooth_sat, virtual_control)
from dragtrack.observer import ObserverGains, ObserverState

OBS = ObserverGains(h1=2.0, h2=1.0, eps=0.425)


def _kin(**kw):
    base = dict(d=20.0, v=4000.0, gamma=math.radians(-8.0), g=3.6,
                r=MARS.r0 + 30e3, l=3.6)
    base.update(kw)
    return DragKinematics(**base)


def _rates(t, u, chi_n, x0, xh1, xh2, kin, ref_triple, gains=None, obs=OBS):
    gains = gains or GuidanceGains()
    rd = np.array([ref_triple[0]])
    rdd = np.array([ref_triple[1]])
    rddd = np.array([ref_triple[2]])
    out = np.empty(gd.CTRL_NOUT)
    status = gd.controller_rates(
        t, u, chi_n, x0, xh1, xh2,
        kin.d, kin.v, kin.gamma, kin.g, kin.r, kin.l, MARS.hs,
        rd, rdd, rddd, 1.0,
        gains.alpha1, gains.alpha2, gains.alpha3_effective, gains.eps0,
        gains.tau, gains.gamma_x, gains.k,
        obs.h1, obs.h2, obs.eps, gains.g0_floor, gains.ubar_max, out)
    return status, out


# smooth saturation -------------------------------------------------------

def test_smooth_sat_at_zero():
    g, dg = smooth_sat(0.0)
    assert g == 0.0
    assert dg == 1.0


def test_smooth_sat_tails():
    for u in (20.0, -20.0):
        g, dg = smooth_sat(u)
        # tanh(20) collapses to 1.0 at double precision; the slope stays tiny
        assert abs(g) <= 1.0
        assert dg < 1e-16
    g18, _ = smooth_sat(18.0)
    assert g18 < 1.0


def test_smooth_sat_odd_symmetry():
    for u in np.linspace(-6, 6, 61):
        g1, _ = smooth_sat(u)
        g2, _ = smooth_sat(-u)
        assert g1 == -g2


def test_sat_tanh_gap_bounded():
    # |sat - tanh| <= 1 - tanh(1) inside the linear band, -> 0 outside
    for u in np.linspace(-1, 1, 41):
        assert abs(np.clip(u, -1, 1) - math.tanh(u)) <= 1 - math.tanh(1) + 1e-15
    gaps = [abs(np.clip(u, -1, 1) - math.tanh(u)) for u in (2.0, 4.0, 8.0, 16.0)]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 3e-7


# Nussbaum gain ------------------------------------------------------------

def test_nussbaum_values():
    assert nussbaum(0.0) == 1.0
    assert abs(nussbaum(1.0)) < 1e-12
    assert nussbaum(2.0) == pytest.approx(-math.exp(4.0), rel=1e-12)


def test_nussbaum_even():
    for chi in np.linspace(0.0, 5.0, 23):
        assert nussbaum(chi) == nussbaum(-chi)


def test_nussbaum_overflow_guard():
    with pytest.raises(NussbaumOverflowError):
        nussbaum(27.0)


# virtual control ----------------------------------------------------------

def test_virtual_control_zero_when_balanced():
    k = _kin()
    f, g0 = f_g0_terms(k, MARS.hs)
    clamped, raw = virtual_control(0.0, 0.0, 0.0, f, g0, f, GuidanceGains())
    assert raw == 0.0
    assert clamped == 0.0


def test_virtual_control_linear_in_x0():
    k = _kin()
    f, g0 = f_g0_terms(k, MARS.hs)
    gains = GuidanceGains()
    _, raw1 = virtual_control(1e-3, 0.0, 0.0, f, g0, f, gains)
    _, raw2 = virtual_control(2e-3, 0.0, 0.0, f, g0, f, gains)
    assert raw2 == pytest.approx(2.0 * raw1, rel=1e-12)


def test_virtual_control_saturates_in_rarefied_flight():
    # early-entry kinematics: tiny drag and lift make g0 vanishingly small
    k = _kin(d=4e-3, l=7.2e-4, v=6750.0, gamma=math.radians(-14.4),
             r=MARS.r0 + 126.1e3, g=3.45)
    f, g0 = f_g0_terms(k, MARS.hs)
    assert abs(g0) < 1e-8
    clamped, raw = virtual_control(0.0, 1e-3, 0.0, f, g0, f, GuidanceGains())
    assert abs(raw) > 1.0e3
    assert abs(clamped) == 1.0


def test_virtual_control_g0_zero_raises():
    with pytest.raises(GZeroSingularError):
        virtual_control(0.0, 0.0, 0.0, 1.0, 0.0, 1.0, GuidanceGains())


# G term -------------------------------------------------------------------

def test_g_term_reduced_form_when_aligned():
    parts = GStarPartials(d_t=0.3, d_x0=-0.5, d_x1=0.7, d_xhat2=-0.2)
    got = g_term(x1=1.5, d=20.0, partials=parts, g0=-0.1, g_tilde=0.0,
                 p_val=2.0, xhat2_dot=0.4)
    expected = -0.3 - (-0.5) * 1.5 - 0.7 * 2.0 - (-0.2) * 0.4
    assert got == pytest.approx(expected, rel=1e-14)


def test_gstar_x0_partial_matches_finite_difference():
    k = _kin()
    f, g0 = f_g0_terms(k, MARS.hs)
    gains = GuidanceGains()
    # pick a balance point where the command is deep inside the clamp
    dds = f + g0 * 0.4
    analytic = -(gains.alpha3 / gains.eps0 ** 3) / g0
    h = 1e-4
    _, up = virtual_control(h, 0.0, 0.0, f, g0, dds, gains)
    _, dn = virtual_control(-h, 0.0, 0.0, f, g0, dds, gains)
    assert (up - dn) / (2 * h) == pytest.approx(analytic, rel=1e-6)


def test_controller_partials_analytic_interior():
    k = _kin()
    f, g0 = f_g0_terms(k, MARS.hs)
    gains = GuidanceGains()
    dds = f + g0 * 0.4
    status, out = _rates(0.0, 0.3, 0.0, 0.0, 0.0, 0.0, k, (k.d, 0.0, dds), gains)
    assert status == gd.CTRL_OK
    assert abs(out[gd.CTRL_GSTAR_RAW]) < 0.95  # interior: fade inactive
    assert out[gd.CTRL_DGS_DX0] == pytest.approx(
        -(gains.alpha3 / gains.eps0 ** 3) / g0, rel=1e-12)
    assert out[gd.CTRL_DGS_DXH2] == pytest.approx(
        -(gains.alpha1 / gains.eps0) / g0, rel=1e-12)
    assert out[gd.CTRL_DGS_DT] == 0.0  # frozen reference


def test_controller_partials_zero_when_clamped():
    k = _kin()
    f, g0 = f_g0_terms(k, MARS.hs)
    dds = f + g0 * 0.4
    # large x1 drives the raw command far beyond the clamp
    status, out = _rates(0.0, 0.3, 0.0, 0.0, 5.0, 0.0, k, (k.d - 5.0, 0.0, dds))
    assert status == gd.CTRL_OK
    assert abs(out[gd.CTRL_GSTAR_RAW]) > 1.0
    for idx in (gd.CTRL_DGS_DT, gd.CTRL_DGS_DX0, gd.CTRL_DGS_DX1, gd.CTRL_DGS_DXH2):
        assert out[idx] == 0.0


def test_chi_frozen_when_tracking_virtual_target():
    k = _kin()
    f, g0 = f_g0_terms(k, MARS.hs)
    u = 0.3
    dds = f + g0 * math.tanh(u)  # make g* equal tanh(u) exactly
    status, out = _rates(0.0, u, 0.0, 0.0, 0.0, 0.0, k, (k.d, 0.0, dds))
    assert status == gd.CTRL_OK
    assert out[gd.CTRL_GSTAR] == pytest.approx(math.tanh(u), rel=1e-9)
    assert abs(out[gd.CTRL_DCHI]) < 1e-12


# guidance_step ------------------------------------------------------------

def test_sigma_command_from_filter_state():
    k = _kin()
    f, g0 = f_g0_terms(k, MARS.hs)
    ref = (k.d, 0.0, f + g0 * 0.4)
    for u, expected_deg in ((0.0, 90.0), (5.0, 0.0), (-5.0, 180.0)):
        gs = GuidanceState(u=u, observer=ObserverState())
        sigma, _, diag = guidance_step(gs, k, ref, GuidanceGains(), OBS,
                                       dt=0.01, hs=MARS.hs)
        assert math.degrees(sigma) == pytest.approx(expected_deg, abs=1e-9)
        assert 0.0 <= sigma <= math.pi
        assert diag.sat_u == pytest.approx(max(-1.0, min(1.0, u)))


def test_filter_homogeneous_decay():
    # X = 1 makes N(X) = 0, so u_c vanishes and u decays as exp(-t/tau);
    # a vanishing Nussbaum rate keeps X pinned there for the whole window
    k = _kin()
    f, g0 = f_g0_terms(k, MARS.hs)
    ref = (k.d, 0.0, f + g0 * 0.4)
    gains = GuidanceGains(gamma_x=1e-15)
    gs = GuidanceState(u=0.8, chi_n=1.0, observer=ObserverState())
    t = 0.0
    for _ in range(100):
        _, gs, _ = guidance_step(gs, k, ref, gains, OBS, dt=0.01, hs=MARS.hs)
        t += 0.01
    assert gs.u == pytest.approx(0.8 * math.exp(-t / gains.tau), rel=1e-7)


def test_guidance_step_rejects_bad_dt():
    k = _kin()
    with pytest.raises(ValueError):
        guidance_step(GuidanceState(), k, (20.0, 0.0, 0.0), GuidanceGains(), OBS,
                      dt=0.0, hs=MARS.hs)


def test_gain_validation_routh():
    with pytest.raises(ValueError, match="Routh"):
        GuidanceGains(alpha1=1.0, alpha2=1.0, alpha3=1.0)
    GuidanceGains(alpha1=1.0, alpha2=1.0, alpha3=1.0, integral_enabled=False)


def test_baseline_drops_integral_channel():
    gains = GuidanceGains(integral_enabled=False)
    assert gains.alpha3_effective == 0.0
    k = _kin()
    f, g0 = f_g0_terms(k, MARS.hs)
    _, raw = virtual_control(123.0, 0.0, 0.0, f, g0, f, gains)
    assert raw == 0.0  # x0 has no effect


# closed-loop invariants ---------------------------------------------------

def test_sigma_within_limits_every_step(nominal_log):
    assert nominal_log.sigma.min() >= 0.0
    assert nominal_log.sigma.max() <= math.pi


def test_chi_bounded_on_nominal(nominal_log):
    assert nominal_log.terminal.max_abs_chi_n < 10.0
