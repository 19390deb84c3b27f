"""Path-ensemble experiments: recurrence proxies and occupancy checks.

The recurrence proxy is band-return: a path counts as "returned" when,
after first reaching |Z| >= level, it re-enters the band [-band, band].
Fractions come with Wilson 95% intervals.  Occupancy estimates bin one
long ergodic path into unit cells and are checked against the
discretized chain through the stationary balance relation

    P*_{n+1} mu*_{n+1} + P*_{n-1} lambda*_{n-1} = P*_n (lambda*_n + mu*_n)

evaluated on interior cells of the estimate window (edge cells would
reference mass outside the window).
"""

from __future__ import annotations

import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .classifier import BDChain
from .fields import JumpLaw, RateField
from .seeding import path_seed
from .simulator import simulate_walk

__all__ = [
    "PathOutcome",
    "RecurrenceExperiment",
    "ExperimentReport",
    "OccupancyEstimate",
    "BalanceResidual",
    "wilson_interval",
    "run_recurrence_experiment",
    "experiment_csv",
    "estimate_occupancy",
    "balance_residual",
    "solve_balance_window",
]

_Z95 = 1.959963984540054


def wilson_interval(successes: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial fraction; (nan, nan) when empty."""
    if trials < 0 or successes < 0 or successes > trials:
        raise ValueError("need 0 <= successes <= trials")
    if trials == 0:
        return (math.nan, math.nan)
    ph = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (ph + z2 / (2.0 * trials)) / denom
    half = z * math.sqrt(ph * (1.0 - ph) / trials + z2 / (4.0 * trials * trials)) / denom
    # at the boundaries center and half agree analytically; rounding
    # must not push the bound past the point estimate
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return (lo, hi)


@dataclass(frozen=True)
class PathOutcome:
    path: int
    seed: int
    reached_level: bool
    first_hit_time: float
    returned: bool
    final_z: float


@dataclass(frozen=True)
class RecurrenceExperiment:
    """Configuration of one band-return ensemble."""

    rate_field: RateField
    up_law: JumpLaw
    down_law: JumpLaw
    n_paths: int
    horizon: float
    level: float
    band: float
    seed: int
    z0: float = 0.0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")
        if not self.level > self.band > 0:
            raise ValueError("need level > band > 0")
        if self.workers < 0:
            raise ValueError("workers must be nonnegative (0 = auto)")


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    """Ensemble summary plus the per-path outcomes behind it."""

    n_paths: int
    reached_fraction: float
    returned_fraction: float
    returned_ci: tuple[float, float]
    mean_final_position: float
    runtime_seconds: float
    proxy: str
    paths: tuple[PathOutcome, ...]

    def to_record(self) -> dict:
        def none_if_nan(v: float):
            return None if isinstance(v, float) and math.isnan(v) else v

        return {
            "n_paths": self.n_paths,
            "reached_fraction": self.reached_fraction,
            "returned_fraction": none_if_nan(self.returned_fraction),
            "returned_ci": [none_if_nan(self.returned_ci[0]), none_if_nan(self.returned_ci[1])],
            "mean_final_position": self.mean_final_position,
            "runtime_seconds": self.runtime_seconds,
            "proxy": self.proxy,
        }


def _analyze_path(exp: RecurrenceExperiment, index: int) -> PathOutcome:
    seed = path_seed(exp.seed, index)
    traj = simulate_walk(
        exp.rate_field, exp.up_law, exp.down_law, exp.horizon, seed, exp.z0
    )
    z = traj.z_after
    reached = False
    t_hit = math.nan
    returned = False
    if z.size:
        absz = np.abs(z)
        hit = absz >= exp.level
        if hit.any():
            i = int(np.argmax(hit))
            reached = True
            t_hit = float(traj.times[i])
            returned = bool(np.any(absz[i + 1 :] <= exp.band))
    return PathOutcome(
        path=index,
        seed=seed,
        reached_level=reached,
        first_hit_time=t_hit,
        returned=returned,
        final_z=traj.final_z,
    )


def _run_path_range(exp: RecurrenceExperiment, start: int, stop: int) -> list[PathOutcome]:
    return [_analyze_path(exp, i) for i in range(start, stop)]


def run_recurrence_experiment(exp: RecurrenceExperiment) -> ExperimentReport:
    """Run the ensemble and summarize it.

    Paths are seeded per index, generated independently, and reduced in
    index order, so the report does not depend on the worker count.
    """
    if exp.horizon < 4.0 * exp.level * exp.level:
        warnings.warn(
            "horizon is shorter than 4 * level^2; diffusive return times "
            "will be cut off and returned_fraction biased low",
            UserWarning,
            stacklevel=2,
        )

    t0 = time.perf_counter()
    workers = exp.workers if exp.workers > 0 else (os.cpu_count() or 1)
    if workers == 1 or exp.n_paths < 4:
        outcomes = _run_path_range(exp, 0, exp.n_paths)
    else:
        chunk = max(1, math.ceil(exp.n_paths / (4 * workers)))
        spans = [
            (s, min(s + chunk, exp.n_paths)) for s in range(0, exp.n_paths, chunk)
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_run_path_range, *zip(*((exp, a, b) for a, b in spans)))
            outcomes = [o for part in parts for o in part]
    runtime = time.perf_counter() - t0

    n = exp.n_paths
    n_reached = sum(1 for o in outcomes if o.reached_level)
    n_returned = sum(1 for o in outcomes if o.returned)
    reached_fraction = n_reached / n
    returned_fraction = n_returned / n_reached if n_reached else math.nan
    ci = wilson_interval(n_returned, n_reached)
    mean_final = float(np.mean([o.final_z for o in outcomes]))
    if reached_fraction < 0.5:
        warnings.warn(
            f"only {reached_fraction:.1%} of paths reached level {exp.level:g}; "
            "the returned_fraction estimate rests on a thin subsample",
            UserWarning,
            stacklevel=2,
        )

    return ExperimentReport(
        n_paths=n,
        reached_fraction=reached_fraction,
        returned_fraction=returned_fraction,
        returned_ci=ci,
        mean_final_position=mean_final,
        runtime_seconds=runtime,
        proxy="band-return",
        paths=tuple(outcomes),
    )


def experiment_csv(report: ExperimentReport) -> str:
    """One row per path: path,seed,reached_L,first_hit_time,returned,final_z."""
    lines = ["path,seed,reached_L,first_hit_time,returned,final_z"]
    for o in report.paths:
        lines.append(
            f"{o.path},{o.seed},{int(o.reached_level)},{o.first_hit_time!r},"
            f"{int(o.returned)},{o.final_z!r}"
        )
    return "\n".join(lines) + "\n"


@dataclass(frozen=True, eq=False)
class OccupancyEstimate:
    """Fraction of time spent in each unit cell [n-1, n) of a window.

    ``p_star[i]`` is the occupancy of cell n = n_min + i.  Masses sum to
    at most 1 (time spent outside the window is simply not counted).
    """

    n_min: int
    n_max: int
    p_star: np.ndarray
    total_time: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "p_star", np.asarray(self.p_star, float))
        if self.n_min > self.n_max:
            raise ValueError("n_min must not exceed n_max")
        if self.p_star.shape != (self.n_max - self.n_min + 1,):
            raise ValueError("p_star must have one entry per cell")

    def cell(self, n: int) -> float:
        if not self.n_min <= n <= self.n_max:
            raise ValueError(f"cell {n} outside window [{self.n_min}, {self.n_max}]")
        return float(self.p_star[n - self.n_min])


def estimate_occupancy(
    rf: RateField,
    up_law: JumpLaw,
    down_law: JumpLaw,
    total_time: float,
    window: tuple[int, int],
    seed: int,
    z0: float = 0.0,
) -> OccupancyEstimate:
    """Time-average occupancy of unit cells along one long path.

    Only signed (mean-reverting) drifts are accepted: the in-scope
    vanishing-drift families have no stationary occupancy to estimate.
    A zero observation time returns the all-zero estimate.
    """
    n_min, n_max = int(window[0]), int(window[1])
    if n_min > n_max:
        raise ValueError("window must satisfy n_min <= n_max")
    if total_time < 0:
        raise ValueError("total_time must be nonnegative")
    if not rf.drift.signed:
        raise ValueError("occupancy estimation needs a signed mean-reverting drift")

    size = n_max - n_min + 1
    if total_time == 0:
        return OccupancyEstimate(n_min, n_max, np.zeros(size), 0.0)

    traj = simulate_walk(rf, up_law, down_law, total_time, seed, z0)
    starts = np.concatenate(([0.0], traj.times))
    zvals = np.concatenate(([z0], traj.z_after))
    ends = np.concatenate((traj.times, [total_time]))
    durs = ends - starts

    cells = np.floor(zvals).astype(np.int64) + 1
    acc = np.zeros(size)
    inside = (cells >= n_min) & (cells <= n_max)
    np.add.at(acc, cells[inside] - n_min, durs[inside])
    return OccupancyEstimate(n_min, n_max, acc / total_time, float(total_time))


@dataclass(frozen=True, eq=False)
class BalanceResidual:
    """Stationary-balance residuals on the interior cells of a window."""

    n_lo: int
    n_hi: int
    residuals: np.ndarray
    l1: float


def balance_residual(occ: OccupancyEstimate, chain: BDChain) -> BalanceResidual:
    """Residual of the balance relation fed with estimated occupancies.

    The chain window must cover the occupancy window with one cell of
    margin on each side.  Residuals are evaluated for
    n in [n_min + 1, n_max - 1], where every referenced mass and rate is
    available inside the windows.
    """
    if chain.n_min > occ.n_min - 1 or chain.n_max < occ.n_max + 1:
        raise ValueError(
            "chain window must cover the occupancy window with one cell of margin"
        )
    if occ.n_max - occ.n_min < 2:
        raise ValueError("occupancy window too narrow: no interior cells")

    ns = np.arange(occ.n_min + 1, occ.n_max)
    p = occ.p_star
    lam, mu = chain.rates_at(ns)
    lam_lo, _ = chain.rates_at(ns - 1)
    _, mu_hi = chain.rates_at(ns + 1)

    i = ns - occ.n_min
    res = p[i + 1] * mu_hi + p[i - 1] * lam_lo - p[i] * (lam + mu)
    return BalanceResidual(
        n_lo=int(ns[0]), n_hi=int(ns[-1]), residuals=res, l1=float(np.sum(np.abs(res)))
    )


def solve_balance_window(chain: BDChain, n_min: int, n_max: int) -> OccupancyEstimate:
    """Exact stationary masses on [n_min, n_max] with reflecting closure.

    Solves the tridiagonal balance system whose interior rows are the
    free-form relation and whose boundary rows reflect the walk back
    into the window, normalized to total mass 1.  Interior residuals of
    the returned masses vanish to solver precision, which makes this the
    reference input for ``balance_residual``.
    """
    if n_min >= n_max:
        raise ValueError("window must contain at least two cells")
    if chain.n_min > n_min or chain.n_max < n_max:
        raise ValueError("chain window must cover the requested window")

    ns = np.arange(n_min, n_max + 1)
    lam, mu = chain.rates_at(ns)
    k = ns.size

    a = np.zeros((k, k))
    a[0, 0] = -lam[0]
    a[0, 1] = mu[1]
    for i in range(1, k - 1):
        a[i, i - 1] = lam[i - 1]
        a[i, i] = -(lam[i] + mu[i])
        a[i, i + 1] = mu[i + 1]
    a[k - 1, k - 2] = lam[k - 2]
    a[k - 1, k - 1] = -mu[k - 1]

    # Rank is k-1; swap the last balance row for the normalization.
    a[k - 1, :] = 1.0
    b = np.zeros(k)
    b[k - 1] = 1.0
    p = np.linalg.solve(a, b)
    if np.any(p < -1e-12):
        raise ArithmeticError("stationary solve produced negative mass")
    p = np.maximum(p, 0.0)
    p = p / p.sum()
    return OccupancyEstimate(n_min, n_max, p, math.inf)
