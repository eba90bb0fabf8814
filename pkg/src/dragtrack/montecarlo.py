"""Dispersion sampling, campaign execution, and summary statistics.

Per-run seeds come from numpy's SeedSequence spawned off one master seed, so
run i always sees the same dispersions no matter how many runs follow it or
in what order the pool executes. The report is a pure function of
(n, base config, master seed, law variant).
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .engine import SimConfig, error_metrics, run_trajectory
from .environment import DensityDispersion

# Uniform dispersion half-ranges: mass, density, lift and drag coefficients.
RANGE_D_M = 0.05
RANGE_D_RHO = 0.20
RANGE_D_CL = 0.30
RANGE_D_CD = 0.30


@dataclass(frozen=True)
class DispersionSet:
    d_m: float = 0.0
    d_rho: float = 0.0
    d_cl: float = 0.0
    d_cd: float = 0.0

    def __post_init__(self):
        for name, lim in (("d_m", RANGE_D_M), ("d_rho", RANGE_D_RHO),
                          ("d_cl", RANGE_D_CL), ("d_cd", RANGE_D_CD)):
            if abs(getattr(self, name)) > lim + 1e-12:
                raise ValueError(f"DispersionSet.{name} outside +-{lim:.0%}")


def sample_dispersions(rng: np.random.Generator) -> DispersionSet:
    """Independent uniform draws over the dispersion ranges, in fixed order."""
    return DispersionSet(
        d_m=rng.uniform(-RANGE_D_M, RANGE_D_M),
        d_rho=rng.uniform(-RANGE_D_RHO, RANGE_D_RHO),
        d_cl=rng.uniform(-RANGE_D_CL, RANGE_D_CL),
        d_cd=rng.uniform(-RANGE_D_CD, RANGE_D_CD),
    )


def apply_dispersions(config: SimConfig, disp: DispersionSet) -> SimConfig:
    vehicle = replace(config.vehicle, d_cl=disp.d_cl, d_cd=disp.d_cd, d_m=disp.d_m)
    return replace(config, vehicle=vehicle, density_disp=DensityDispersion(disp.d_rho))


def statistics(values):
    """(min, max, mean, sample std). Sample std uses the n-1 denominator and
    is defined as 0 for a single value."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("statistics of an empty sequence")
    std = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
    return float(arr.min()), float(arr.max()), float(arr.mean()), std


@dataclass
class RunResult:
    index: int
    dispersions: DispersionSet
    status: str
    downrange_error_km: float = math.nan
    altitude_error_km: float = math.nan
    terminal_time: float = math.nan
    terminal_velocity: float = math.nan
    max_abs_chi_n: float = math.nan
    sigma_min_deg: float = math.nan
    sigma_max_deg: float = math.nan

    @property
    def ok(self) -> bool:
        return self.status == "velocity"


@dataclass
class McReport:
    runs: list
    n: int
    master_seed: int
    baseline: bool
    target_downrange_km: float
    target_altitude_km: float

    @property
    def successes(self):
        return [r for r in self.runs if r.ok]

    @property
    def failures(self):
        return [r for r in self.runs if not r.ok]

    @property
    def success_fraction(self) -> float:
        return len(self.successes) / self.n

    @property
    def ok(self) -> bool:
        """Campaign succeeds when at least 99% of runs end via the velocity event."""
        return self.success_fraction >= 0.99

    def summary(self) -> dict:
        """Min/max/average/sample-std table over successful runs."""
        rows = {}
        for label, key in (("downrange_error_km", "downrange_error_km"),
                           ("altitude_error_km", "altitude_error_km")):
            vals = [getattr(r, key) for r in self.successes]
            mn, mx, avg, std = statistics(vals)
            rows[label] = {"minimum": mn, "maximum": mx, "average": avg,
                           "standard_deviation": std}
        rows["n_runs"] = self.n
        rows["n_success"] = len(self.successes)
        rows["success_fraction"] = self.success_fraction
        rows["master_seed"] = self.master_seed
        rows["law"] = "no-integral" if self.baseline else "proposed"
        rows["std_denominator"] = "n-1"
        rows["target_downrange_km"] = self.target_downrange_km
        rows["target_altitude_km"] = self.target_altitude_km
        return rows

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("index,d_m,d_rho,d_cl,d_cd,status,downrange_error_km,"
                     "altitude_error_km,terminal_time,terminal_velocity,"
                     "max_abs_chi_n,sigma_min_deg,sigma_max_deg\n")
            for r in self.runs:
                d = r.dispersions
                fh.write(f"{r.index},{d.d_m:.10g},{d.d_rho:.10g},{d.d_cl:.10g},"
                         f"{d.d_cd:.10g},{r.status},{r.downrange_error_km:.10g},"
                         f"{r.altitude_error_km:.10g},{r.terminal_time:.10g},"
                         f"{r.terminal_velocity:.10g},{r.max_abs_chi_n:.10g},"
                         f"{r.sigma_min_deg:.10g},{r.sigma_max_deg:.10g}\n")


def _single_run(args):
    index, seed_seq, base, baseline, targets = args
    rng = np.random.default_rng(seed_seq)
    disp = sample_dispersions(rng)
    cfg = apply_dispersions(base, disp)
    if baseline:
        cfg = replace(cfg, guid_gains=replace(cfg.guid_gains, integral_enabled=False))
    res = RunResult(index=index, dispersions=disp, status="setup-failed")
    try:
        log = run_trajectory(cfg, log=False, strict=False)
    except Exception as exc:  # config errors surface per-run, not campaign-wide
        res.status = f"error:{type(exc).__name__}"
        return res
    term = log.terminal
    res.status = term.status
    ddr, dalt = error_metrics(log, targets[0], targets[1])
    res.downrange_error_km = ddr
    res.altitude_error_km = dalt
    res.terminal_time = term.time
    res.terminal_velocity = term.velocity
    res.max_abs_chi_n = term.max_abs_chi_n
    res.sigma_min_deg = math.degrees(term.sigma_min)
    res.sigma_max_deg = math.degrees(term.sigma_max)
    return res


def run_campaign(n: int, base_config: SimConfig, master_seed: int,
                 baseline: bool = False, workers: int = 1,
                 progress=None) -> McReport:
    """Run n dispersed trajectories and assemble the statistics report.

    Results are keyed by run index, so the report is identical for any
    worker count or completion order.
    """
    if n < 1:
        raise ValueError("need at least one run")
    base_config.validate()
    ref = base_config.reference
    targets = (ref.term_downrange / 1e3, ref.term_altitude / 1e3)
    seeds = np.random.SeedSequence(master_seed).spawn(n)
    jobs = [(i, seeds[i], base_config, baseline, targets) for i in range(n)]
    results = [None] * n
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for res in pool.map(_single_run, jobs, chunksize=16):
                results[res.index] = res
                if progress:
                    progress(sum(r is not None for r in results), n)
    else:
        for i, job in enumerate(jobs):
            results[i] = _single_run(job)
            if progress:
                progress(i + 1, n)
    return McReport(runs=results, n=n, master_seed=master_seed, baseline=baseline,
                    target_downrange_km=targets[0], target_altitude_km=targets[1])
