import math

import numpy as np
import pytest

from dragtrack.dynamics import (DOWNRANGE_SIGN, VehicleParams, VehicleState,
                                aero_accel, plant_rates, state_derivative)
from dragtrack.environment import MARS


def _state(**kw):
    base = dict(r=MARS.r0 + 50e3, phi=0.0, theta=0.0, v=4000.0,
                gamma=math.radians(-10.0), chi=math.radians(90.0), s=0.0)
    base.update(kw)
    return VehicleState(**base)


def test_drag_direct_formula():
    st = _state(v=2.0)
    params = VehicleParams(m=1.0, S=1.0, cl0=0.5, cd0=1.0)
    lift, drag = aero_accel(st, params, rho=1.0)
    assert drag == pytest.approx(2.0, rel=1e-15)
    assert lift == pytest.approx(1.0, rel=1e-15)


def test_lift_drag_ratio_cancels(rng):
    params = VehicleParams(m=2925.6, S=15.9, cl0=0.288, cd0=1.6)
    for _ in range(20):
        st = _state(v=rng.uniform(500, 7000))
        lift, drag = aero_accel(st, params, rho=rng.uniform(1e-6, 0.02))
        assert lift / drag == pytest.approx(0.18, rel=1e-12)


def test_drag_dispersion_scaling():
    st = _state()
    nominal = VehicleParams(m=10.0, S=2.0, cl0=0.3, cd0=1.5)
    dispersed = VehicleParams(m=10.0, S=2.0, cl0=0.3, cd0=1.5, d_cd=0.3)
    _, d0 = aero_accel(st, nominal, rho=0.01)
    _, d1 = aero_accel(st, dispersed, rho=0.01)
    assert d1 == pytest.approx(1.3 * d0, rel=1e-14)


def test_ballistic_coefficient():
    params = VehicleParams(m=2925.6, S=15.9, cl0=0.288, cd0=1.6)
    assert params.ballistic_coefficient == pytest.approx(115.0, rel=1e-12)


def test_level_flight_zero_radial_rate():
    st = _state(gamma=0.0)
    rates = state_derivative(st, lift=1.0, drag=2.0, g=3.7, sigma=0.5, r0=MARS.r0)
    assert rates[0] == 0.0


def test_bank_90_kills_lift_in_gamma_rate():
    st = _state()
    g = 3.7
    rates = state_derivative(st, lift=5.0, drag=2.0, g=g, sigma=math.pi / 2, r0=MARS.r0)
    expected = -(g / st.v - st.v / st.r) * math.cos(st.gamma)
    assert rates[4] == pytest.approx(expected, rel=1e-12)


def test_vertical_dive_boundary_probe():
    # gamma = 90 deg sits outside the flight domain; probe the raw rates
    g = 3.7
    rates = plant_rates(MARS.r0 + 50e3, 0.0, 4000.0, math.pi / 2, math.pi / 2,
                        1.0, 2.0, g, 1.0, 0.0, MARS.r0)
    assert rates[3] == pytest.approx(-2.0 - g, rel=1e-14)


def test_polar_singularity_guard():
    st = _state(theta=math.radians(89.9999))
    with pytest.raises(ValueError, match="polar"):
        state_derivative(st, 1.0, 2.0, 3.7, 0.5, MARS.r0)


def test_state_invariants():
    with pytest.raises(ValueError):
        _state(v=-1.0)
    with pytest.raises(ValueError):
        _state(gamma=math.radians(95.0))


def test_energy_monotone_on_trajectory(nominal_log):
    energy = 0.5 * nominal_log.v ** 2 - MARS.mu / nominal_log.r
    assert np.all(np.diff(energy) < 0.0)


def test_downrange_sign_and_growth(nominal_log):
    ds = np.diff(nominal_log.s)
    assert np.all(ds < 0.0)  # raw state decreases with the leading minus
    travelled = DOWNRANGE_SIGN * nominal_log.s
    assert np.all(np.diff(travelled) > 0.0)
    assert travelled[-1] > 7e5


def test_derivative_is_pure():
    st = _state()
    a = state_derivative(st, 1.0, 2.0, 3.7, 0.5, MARS.r0)
    b = state_derivative(st, 1.0, 2.0, 3.7, 0.5, MARS.r0)
    assert a == b
