"""Batch command-line front end.

Subcommands:
  reference   generate the nominal drag profile and write it as CSV
  nominal     one zero-dispersion closed-loop run: trajectory CSV, summary
              JSON and figures
  montecarlo  dispersed campaign: per-run CSV, summary JSON and scatter
              figures (--baseline switches to the no-integral law)
  verify      gain checks, Nussbaum scan and boundedness monitor; pass/fail
              JSON

Exit codes: 0 success, 1 validation/usage failure, 2 runtime failure.
"""

import argparse
import json
import math
import sys
import time
from pathlib import Path

from . import engine, montecarlo, plots, reference, verify
from .config import ScenarioConfig


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(1)


def _build_parser():
    parser = _Parser(prog="dragtrack",
                     description="drag-tracking entry guidance simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, default=None,
                       help="JSON scenario file (defaults are built in)")
        p.add_argument("--out", type=Path, default=Path("out"),
                       help="output directory (created if missing)")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE",
                       help="dotted config override, e.g. gains.eps=0.425")
        p.add_argument("--reference-csv", type=Path, default=None,
                       help="reuse a previously generated reference profile")

    common(sub.add_parser("reference", help="generate the reference drag profile"))
    common(sub.add_parser("nominal", help="zero-dispersion closed-loop run"))
    mc = sub.add_parser("montecarlo", help="dispersed Monte Carlo campaign")
    common(mc)
    mc.add_argument("--runs", type=int, default=None, help="number of runs")
    mc.add_argument("--seed", type=int, default=None, help="master seed")
    mc.add_argument("--baseline", action="store_true",
                    help="run the no-integral baseline law instead")
    mc.add_argument("--workers", type=int, default=None,
                    help="worker processes (default from config)")
    common(sub.add_parser("verify", help="stability machinery checks"))
    return parser


def _load_config(args):
    cfg = ScenarioConfig.load(args.config, args.overrides)
    cfg.validate()
    return cfg


def _get_reference(cfg, args):
    if args.reference_csv is not None:
        return reference.load_csv(args.reference_csv)
    return cfg.build_reference()


def cmd_reference(cfg, args, outdir):
    ref = _get_reference(cfg, args)
    path = outdir / "reference.csv"
    reference.save_csv(ref, path)
    print(f"reference: {ref.t.size} samples over {ref.t_end:.2f} s -> {path}")
    print(f"terminal: v={ref.term_velocity:.1f} m/s  h={ref.term_altitude / 1e3:.3f} km"
          f"  downrange={ref.term_downrange / 1e3:.3f} km")
    return 0


def cmd_nominal(cfg, args, outdir):
    ref = _get_reference(cfg, args)
    sim = cfg.sim_config(ref)
    log = engine.run_trajectory(sim)
    log.to_csv(outdir / "trajectory.csv")
    tgt = cfg.targets(ref)
    ddr, dalt = engine.error_metrics(log, *tgt)
    mon = engine.residual_monitor(log)
    summary = {
        "status": log.terminal.status,
        "terminal_time_s": log.terminal.time,
        "terminal_velocity_ms": log.terminal.velocity,
        "terminal_altitude_km": log.terminal.altitude / 1e3,
        "downrange_travelled_km": log.terminal.downrange / 1e3,
        "target_downrange_km": tgt[0],
        "target_altitude_km": tgt[1],
        "downrange_error_km": ddr,
        "altitude_error_km": dalt,
        "max_abs_chi_n": log.terminal.max_abs_chi_n,
        "sigma_min_deg": math.degrees(log.terminal.sigma_min),
        "sigma_max_deg": math.degrees(log.terminal.sigma_max),
        "residual_fit": {"l0": mon.l0, "l1": mon.l1, "d": mon.d,
                         "violation_fraction": mon.violation_fraction},
    }
    with open(outdir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    figures = plots.render_run_figures(log, outdir)
    print(f"nominal run: {log.terminal.status} at t={log.terminal.time:.2f} s, "
          f"downrange error {ddr:+.3f} km, altitude error {dalt:+.4f} km")
    print(f"wrote trajectory.csv, summary.json and {len(figures)} figures to {outdir}")
    return 0


def cmd_montecarlo(cfg, args, outdir):
    ref = _get_reference(cfg, args)
    mc_cfg = cfg.raw["montecarlo"]
    n = args.runs if args.runs is not None else mc_cfg["runs"]
    seed = args.seed if args.seed is not None else mc_cfg["seed"]
    workers = args.workers if args.workers is not None else mc_cfg["workers"]
    sim = cfg.sim_config(ref, monte_carlo=True, baseline=args.baseline)
    t0 = time.time()

    def progress(done, total):
        if done % 100 == 0 or done == total:
            print(f"  {done}/{total} runs ({time.time() - t0:.0f} s)", flush=True)

    report = montecarlo.run_campaign(n, sim, seed, baseline=args.baseline,
                                     workers=workers, progress=progress)
    tag = "baseline" if args.baseline else "proposed"
    report.to_csv(outdir / f"mc_runs_{tag}.csv")
    with open(outdir / f"mc_summary_{tag}.json", "w") as fh:
        json.dump(report.summary(), fh, indent=2)
    plots.fig_mc_scatter(report, outdir / f"mc_scatter_{tag}.svg")
    s = report.summary()
    print(f"{tag} campaign: {s['n_success']}/{n} runs ended via the velocity event "
          f"({time.time() - t0:.0f} s)")
    for metric in ("downrange_error_km", "altitude_error_km"):
        row = s[metric]
        print(f"  {metric}: min {row['minimum']:+.4f}  max {row['maximum']:+.4f}  "
              f"avg {row['average']:+.4f}  std {row['standard_deviation']:.4f}")
    if not report.ok:
        print(f"FAILED: success fraction {report.success_fraction:.3f} below 0.99",
              file=sys.stderr)
        return 2
    return 0


def cmd_verify(cfg, args, outdir):
    results = {}
    ok = True

    gains_rep = verify.hurwitz_check(cfg.observer_gains(), cfg.guidance_gains())
    results["hurwitz"] = {"ok": gains_rep.ok, "reasons": gains_rep.reasons}
    ok &= gains_rep.ok

    scan_up = verify.nussbaum_property_scan([5.0, 9.0, 13.0])
    scan_dn = verify.nussbaum_property_scan([7.0, 11.0, 15.0])
    vals_up = [v for _, v in scan_up]
    vals_dn = [v for _, v in scan_dn]
    scan_ok = (all(v > 0 for v in vals_up) and vals_up == sorted(vals_up)
               and all(v < 0 for v in vals_dn) and vals_dn == sorted(vals_dn, reverse=True))
    results["nussbaum_scan"] = {
        "ok": scan_ok,
        "positive_windows": [[s, v] for s, v in scan_up],
        "negative_windows": [[s, v] for s, v in scan_dn],
    }
    ok &= scan_ok

    ref = _get_reference(cfg, args)
    sim = cfg.sim_config(ref)
    log = engine.run_trajectory(sim, strict=False)
    chi_ceiling = cfg.raw["verify"]["chi_ceiling"]
    vx = verify.vx_monitor_from_log(log, cfg.vx_config())
    run_ok = (log.terminal.status == "velocity"
              and log.terminal.max_abs_chi_n < chi_ceiling and vx.bounded)
    results["closed_loop"] = {
        "ok": run_ok,
        "status": log.terminal.status,
        "max_abs_chi_n": log.terminal.max_abs_chi_n,
        "chi_ceiling": chi_ceiling,
        "max_abs_vx": vx.max_abs,
        "vx_ceiling": cfg.vx_config().ceiling,
        "rho_empirical_min": vx.rho_empirical_min,
        "rho_empirical_max": vx.rho_empirical_max,
    }
    ok &= run_ok

    results["ok"] = bool(ok)
    with open(outdir / "verify.json", "w") as fh:
        json.dump(results, fh, indent=2)
    for name in ("hurwitz", "nussbaum_scan", "closed_loop"):
        print(f"{name}: {'pass' if results[name]['ok'] else 'FAIL'}")
    return 0 if ok else 2


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    outdir = args.out
    outdir.mkdir(parents=True, exist_ok=True)
    handler = {
        "reference": cmd_reference,
        "nominal": cmd_nominal,
        "montecarlo": cmd_montecarlo,
        "verify": cmd_verify,
    }[args.command]
    try:
        return handler(cfg, args, outdir)
    except (engine.SimTimeoutError, engine.NonFiniteStateError, RuntimeError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
