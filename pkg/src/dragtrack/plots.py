"""Static figure rendering for run and campaign reports.

All figures are written as SVG files next to the delimited output. Output is
deterministic for a fixed log: the SVG hash salt is pinned and date metadata
is stripped.
"""

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

plt.rcParams["svg.hashsalt"] = "dragtrack"
_SAVE = {"format": "svg", "metadata": {"Date": None}}


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)
    return str(path)


def fig_saturation(path):
    """Hard saturation versus its smooth tanh surrogate."""
    u = np.linspace(-4.0, 4.0, 401)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(u, np.tanh(u), label="tanh(u)")
    ax.plot(u, np.clip(u, -1, 1), "--", label="sat(u)")
    ax.set_xlabel("u")
    ax.set_ylabel("output")
    ax.grid(True, alpha=0.3)
    ax.legend()
    return _finish(fig, path)


def fig_drag_velocity(log, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(log.t, log.drag, label="D")
    ax1.plot(log.t, log.d_star, "--", label="D*")
    ax1.set_xlabel("time [s]")
    ax1.set_ylabel("drag acceleration [m/s$^2$]")
    ax1.legend()
    ax1.grid(True, alpha=0.3)
    ax2.plot(log.t, log.v / 1e3)
    ax2.set_xlabel("time [s]")
    ax2.set_ylabel("velocity [km/s]")
    ax2.grid(True, alpha=0.3)
    return _finish(fig, path)


def fig_altitude_downrange(log, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(log.t, log.h / 1e3)
    ax1.set_xlabel("time [s]")
    ax1.set_ylabel("altitude [km]")
    ax1.grid(True, alpha=0.3)
    ax2.plot(log.t, -log.s / 1e3)
    ax2.set_xlabel("time [s]")
    ax2.set_ylabel("downrange travelled [km]")
    ax2.grid(True, alpha=0.3)
    return _finish(fig, path)


def fig_bank_fpa(log, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(log.t, np.degrees(log.sigma))
    ax1.set_xlabel("time [s]")
    ax1.set_ylabel("bank angle [deg]")
    ax1.set_ylim(-5, 185)
    ax1.grid(True, alpha=0.3)
    ax2.plot(log.t, np.degrees(log.gamma))
    ax2.set_xlabel("time [s]")
    ax2.set_ylabel("flight path angle [deg]")
    ax2.grid(True, alpha=0.3)
    return _finish(fig, path)


def fig_drag_rate(log, path):
    """Drag-error rate truth (analytic) against the observer estimate."""
    x2 = log.p - log.d_star_dot
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(log.t, x2, label="drag-error rate")
    ax1.plot(log.t, log.xhat2, "--", label="estimate")
    ax1.set_xlabel("time [s]")
    ax1.set_ylabel("rate [m/s$^3$]")
    ax1.legend()
    ax1.grid(True, alpha=0.3)
    ax2.plot(log.t, log.xhat2 - x2)
    ax2.set_xlabel("time [s]")
    ax2.set_ylabel("estimate error [m/s$^3$]")
    ax2.grid(True, alpha=0.3)
    return _finish(fig, path)


def fig_mc_scatter(report, path):
    runs = report.successes
    idx = [r.index for r in runs]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(idx, [r.downrange_error_km for r in runs], ".", ms=3)
    ax1.set_xlabel("run")
    ax1.set_ylabel("downrange error [km]")
    ax1.grid(True, alpha=0.3)
    ax2.plot(idx, [r.altitude_error_km for r in runs], ".", ms=3)
    ax2.set_xlabel("run")
    ax2.set_ylabel("altitude error [km]")
    ax2.grid(True, alpha=0.3)
    law = "no-integral baseline" if report.baseline else "proposed law"
    fig.suptitle(f"Monte Carlo terminal errors ({law}, {len(runs)}/{report.n} runs)")
    return _finish(fig, path)


def render_run_figures(log, outdir):
    """All single-run figures; returns the list of written paths."""
    outdir = str(outdir)
    return [
        fig_saturation(f"{outdir}/saturation.svg"),
        fig_drag_velocity(log, f"{outdir}/drag_velocity.svg"),
        fig_altitude_downrange(log, f"{outdir}/altitude_downrange.svg"),
        fig_bank_fpa(log, f"{outdir}/bank_fpa.svg"),
        fig_drag_rate(log, f"{outdir}/drag_rate.svg"),
    ]
