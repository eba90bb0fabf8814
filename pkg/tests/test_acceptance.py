"""Acceptance gate: every criterion at its stated tolerance.

Each test prints one PASS/FAIL line. Criterion 7's altitude-dispersion
direction is asserted exactly as stated; see notes in the repository docs on
why perfect drag tracking pins the terminal-altitude spread under
multiplicative dispersions.
"""

import math

import numpy as np
import pytest

from dragtrack.engine import error_metrics, rk4_step, run_trajectory
from dragtrack.guidance import nussbaum
from dragtrack.montecarlo import run_campaign, sample_dispersions, apply_dispersions
from dragtrack.verify import (VxMonitorConfig, hurwitz_check_values,
                              nussbaum_property_scan, vx_monitor_from_log)

MASTER_SEED = 20250901


def _report(name, ok, detail=""):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" ({detail})" if detail else ""))
    return ok


def _fd_errors(log, t_min=10.0):
    nu = log.n_uniform
    dt = log.dt
    d = log.drag[:nu]
    t = log.t[2:nu - 2]
    fd1 = (-d[4:] + 8 * d[3:-1] - 8 * d[1:-3] + d[:-4]) / (12 * dt)
    fd2 = (-d[4:] + 16 * d[3:-1] - 30 * d[2:-2] + 16 * d[1:-3] - d[:-4]) / (12 * dt * dt)
    mask = t >= t_min
    p = log.p[2:nu - 2]
    dd = (log.f + log.g0 * log.sat_u)[2:nu - 2]
    e1 = np.abs(p - fd1)[mask].max() / np.abs(fd1[mask]).max()
    e2 = np.abs(dd - fd2)[mask].max() / np.abs(fd2[mask]).max()
    return e1, e2


def test_criterion_1_drag_derivative_oracle(nominal_log):
    """Analytic first/second drag derivatives vs 5-point finite differences."""
    e1, e2 = _fd_errors(nominal_log)
    ok = _report("criterion 1: drag-derivative oracle", e1 < 1e-3 and e2 < 5e-3,
                 f"dD/dt rel {e1:.2e} (tol 1e-3), d2D/dt2 rel {e2:.2e} (tol 5e-3)")
    assert ok


def test_criterion_2_self_consistent_tracking(nominal_log, reference):
    """Closed-loop nominal vs its own reference: 1% band after the initial
    saturation transient, terminal errors below 1 km / 0.2 km."""
    t = nominal_log.t
    sat = np.abs(nominal_log.u) >= 1.0
    t_sat_end = t[sat][-1] if sat.any() else 0.0
    t_settle = t_sat_end + 2.0  # two filter time constants
    mask = t >= t_settle
    peak = nominal_log.d_star.max()
    frac = np.abs(nominal_log.x1[mask]).max() / peak
    ddr, dalt = error_metrics(nominal_log, reference.term_downrange / 1e3,
                              reference.term_altitude / 1e3)
    ok = _report(
        "criterion 2: self-consistent tracking",
        frac <= 0.01 and abs(ddr) < 1.0 and abs(dalt) < 0.2,
        f"|D-D*| {frac:.3%} of peak after t={t_settle:.1f}s, "
        f"downrange {ddr:+.3f} km, altitude {dalt:+.4f} km")
    assert ok


def test_criterion_3_saturation_contract(scenario, reference):
    """Every commanded bank angle within [0, 180] deg across a mini-campaign."""
    cfg = scenario.sim_config(reference, monte_carlo=True)
    rep = run_campaign(100, cfg, master_seed=MASTER_SEED)
    lo = min(r.sigma_min_deg for r in rep.runs)
    hi = max(r.sigma_max_deg for r in rep.runs)
    ok = _report("criterion 3: saturation contract",
                 lo >= 0.0 and hi <= 180.0 and rep.success_fraction == 1.0,
                 f"sigma in [{lo:.2f}, {hi:.2f}] deg over 100 runs")
    assert ok


def test_criterion_4_observer_eps_scaling(scenario, reference):
    """Steady-state rate-estimate error shrinks with the observer gain eps."""
    from dataclasses import replace

    def steady_err(eps):
        cfg = scenario.sim_config(reference)
        cfg.obs_gains = replace(cfg.obs_gains, eps=eps)
        log = run_trajectory(cfg)
        x2 = log.p - log.d_star_dot
        late = log.t >= 100.0
        return float(np.median(np.abs(log.xhat2 - x2)[late]))

    e04 = steady_err(0.4)
    e02 = steady_err(0.2)
    ratio = e02 / e04
    ok = _report("criterion 4: observer eps-scaling", ratio <= 0.6,
                 f"median error {e02:.3e} (eps=0.2) vs {e04:.3e} (eps=0.4), "
                 f"ratio {ratio:.3f} (tol 0.6)")
    assert ok


def test_criterion_5_nussbaum_properties():
    """Alternating divergence of the mean integral plus exact values."""
    up = [v for _, v in nussbaum_property_scan([5.0, 9.0, 13.0])]
    dn = [v for _, v in nussbaum_property_scan([7.0, 11.0, 15.0])]
    trends = (all(v > 0 for v in up) and up[0] < up[1] < up[2]
              and all(v < 0 for v in dn) and dn[0] > dn[1] > dn[2])
    exact = (nussbaum(0.0) == 1.0
             and abs(nussbaum(1.0)) < 1e-12
             and abs(nussbaum(2.0) + math.exp(4.0)) < 1e-12 * math.exp(4.0))
    ok = _report("criterion 5: Nussbaum properties", trends and exact,
                 f"up={['%.3g' % v for v in up]}, down={['%.3g' % v for v in dn]}")
    assert ok


def test_criterion_6_boundedness_monitor(scenario, reference, nominal_log):
    """max|X| < 10 and max|V_X| < 1e6 on nominal plus 20 dispersed runs."""
    vx_cfg = VxMonitorConfig(lam=0.1, ceiling=1e6)
    logs = [nominal_log]
    rng = np.random.default_rng(MASTER_SEED)
    base = scenario.sim_config(reference, monte_carlo=True)
    for _ in range(20):
        cfg = apply_dispersions(base, sample_dispersions(rng))
        logs.append(run_trajectory(cfg, strict=False))
    max_chi = max(log.terminal.max_abs_chi_n for log in logs)
    max_vx = max(vx_monitor_from_log(log, vx_cfg).max_abs for log in logs)
    ok = _report("criterion 6: boundedness monitor",
                 max_chi < 10.0 and max_vx < 1e6,
                 f"max|X| {max_chi:.4g} (tol 10), max|V_X| {max_vx:.4g} (tol 1e6)")
    assert ok


def test_criterion_7_monte_carlo_campaign(scenario, reference):
    """1000-run campaigns for the proposed and no-integral laws."""
    base = scenario.sim_config(reference, monte_carlo=True)
    proposed = run_campaign(1000, base, master_seed=MASTER_SEED)
    baseline = run_campaign(1000, base, master_seed=MASTER_SEED, baseline=True)

    assert proposed.success_fraction >= 0.99
    assert baseline.success_fraction >= 0.99
    assert all(r.status == "velocity" for r in proposed.successes)

    table = proposed.summary()
    for metric in ("downrange_error_km", "altitude_error_km"):
        assert set(table[metric]) == {"minimum", "maximum", "average",
                                      "standard_deviation"}

    std_p = table["altitude_error_km"]["standard_deviation"]
    std_b = baseline.summary()["altitude_error_km"]["standard_deviation"]
    ddr_p = table["downrange_error_km"]["standard_deviation"]
    ddr_b = baseline.summary()["downrange_error_km"]["standard_deviation"]
    direction = std_p <= std_b
    _report("criterion 7: Monte Carlo campaign", direction,
            f"success {proposed.success_fraction:.1%}/{baseline.success_fraction:.1%}, "
            f"altitude std {std_p:.4f} vs baseline {std_b:.4f} km (direction "
            f"{'holds' if direction else 'FAILS'}), downrange std {ddr_p:.2f} vs "
            f"{ddr_b:.2f} km")
    assert direction, (
        "altitude-error standard deviation direction: proposed "
        f"{std_p:.4f} km > baseline {std_b:.4f} km. Tracking the drag profile "
        "to the velocity event forces the terminal-altitude shift "
        "hs*ln((1+d_rho)(1+d_cd)/(1+d_m)) (std ~2.0 km for the sampled ranges); "
        "the proposed law realizes ~94% of that floor because it tracks well, "
        "while the ablated baseline cancels ~half of it through draw-correlated "
        "standing tracking errors. No well-tracking law can win this metric "
        "under multiplicative dispersions; see the downrange comparison for "
        "the robustness ordering.")


def test_criterion_8_integrator_order(scenario, reference):
    """RK4 self-checks: grid convergence and the scalar exponential."""
    cfg = scenario.sim_config(reference)
    d1 = run_trajectory(cfg, log=False).terminal.downrange
    cfg_half = scenario.sim_config(reference)
    cfg_half.dt = 0.005
    d2 = run_trajectory(cfg_half, log=False).terminal.downrange
    exp_err = abs(rk4_step(lambda t, y: y, 0.0, 1.0, 0.1) - math.exp(0.1))
    ok = _report("criterion 8: integrator order",
                 abs(d1 - d2) < 100.0 and exp_err < 1e-7,
                 f"downrange shift {abs(d1 - d2):.3f} m on dt halving, "
                 f"exp step error {exp_err:.2e}")
    assert ok


def test_criterion_9_hurwitz_oracle():
    """Closed-form Hurwitz test vs an eigenvalue-sign oracle, 1000 triples."""
    rng = np.random.default_rng(MASTER_SEED)
    disagreements = 0
    for _ in range(1000):
        h1, h2 = rng.uniform(-1.0, 4.0, 2)
        a1, a2, a3 = rng.uniform(-1.0, 5.0, 3)
        f0 = np.array([[-h1, 1.0], [-h2, 0.0]])
        a0 = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-a3, -a2, -a1]])
        oracle = (np.linalg.eigvals(f0).real.max() < 0.0
                  and np.linalg.eigvals(a0).real.max() < 0.0)
        if hurwitz_check_values(h1, h2, a1, a2, a3) != oracle:
            disagreements += 1
    ok = _report("criterion 9: Hurwitz validator vs eigenvalue oracle",
                 disagreements == 0, f"{disagreements} disagreements in 1000")
    assert ok
