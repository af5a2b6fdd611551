"""Monte Carlo orchestration: substreams, moment estimates, exponent fits.

Replication r of a run with master seed s always draws from the counter-based
substream keyed on (s, r) (Philox with the counter offset by r * 2^128), so
results are bit-identical no matter how replications are scheduled or how
many workers run them, and estimates can be merged deterministically.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import IO, Optional, Sequence

import numpy as np

from .simulate import IncrementModel, couple_quantile, sample_increments

__all__ = [
    "ExponentFit",
    "FUNCTIONALS",
    "MCEstimate",
    "Scenario",
    "SweepResult",
    "estimate_moment",
    "fit_exponent",
    "substream",
    "sweep",
]

FUNCTIONALS = ("coupling-delta", "coupling-delta-inf", "gauss-max", "sum-max")

_MAX_SEED = 1 << 64


def substream(master_seed: int, index: int) -> np.random.Generator:
    """Independent generator for replication ``index`` under ``master_seed``."""
    if not 0 <= master_seed < _MAX_SEED:
        raise ValueError(f"master seed must be a 64-bit unsigned integer, got {master_seed}")
    if index < 0:
        raise ValueError(f"replication index must be >= 0, got {index}")
    # Disjoint 2^128-block counter ranges per replication.
    return np.random.Generator(np.random.Philox(key=master_seed, counter=index << 128))


@dataclass(frozen=True)
class Scenario:
    """What one replication simulates and which functional it reports."""

    model: IncrementModel
    n: int
    functional: str

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.functional not in FUNCTIONALS:
            raise ValueError(f"functional must be one of {FUNCTIONALS}, got {self.functional!r}")

    @property
    def scenario_id(self) -> str:
        return f"{self.functional}:{self.model.label()}:n={self.n}"


def _replicate(scenario: Scenario, gamma: float, rng: np.random.Generator) -> float:
    model = scenario.model
    if scenario.functional == "coupling-delta":
        return couple_quantile(model, scenario.n, rng).delta ** gamma
    if scenario.functional == "coupling-delta-inf":
        return couple_quantile(model, scenario.n, rng).delta_inf ** gamma
    if scenario.functional == "gauss-max":
        y = model.sds * rng.standard_normal((scenario.n, model.dim))
        sums = np.add.accumulate(y, axis=0)
    else:  # sum-max
        sums = np.add.accumulate(sample_increments(model, scenario.n, rng), axis=0)
    norms = np.sqrt(np.sum(sums * sums, axis=1))
    return float(norms.max()) ** gamma


@dataclass(frozen=True)
class MCEstimate:
    """Mean of one simulated functional with its Monte Carlo standard error."""

    mean: float
    stderr: float
    reps: int
    master_seed: int
    meta: str

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "reps": self.reps,
            "master_seed": self.master_seed,
            "meta": self.meta,
        }


def estimate_moment(
    scenario: Scenario,
    gamma: float,
    reps: int,
    master_seed: int,
    threads: int = 1,
) -> MCEstimate:
    """Mean of the scenario functional raised to gamma over ``reps`` replications."""
    if reps < 2:
        raise ValueError(f"reps must be >= 2, got {reps}")
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    vals = np.empty(reps)

    def run_range(lo: int, hi: int) -> None:
        for r in range(lo, hi):
            vals[r] = _replicate(scenario, gamma, substream(master_seed, r))

    if threads > 1:
        step = math.ceil(reps / threads)
        ranges = [(lo, min(lo + step, reps)) for lo in range(0, reps, step)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda span: run_range(*span), ranges))
    else:
        run_range(0, reps)

    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        raise ArithmeticError(
            f"non-finite sample at replication {int(bad[0])} of scenario "
            f"{scenario.scenario_id!r}"
        )
    return MCEstimate(
        mean=float(np.mean(vals)),
        stderr=float(np.std(vals, ddof=1) / math.sqrt(reps)),
        reps=reps,
        master_seed=master_seed,
        meta=f"{scenario.scenario_id}:gamma={gamma!r}",
    )


@dataclass(frozen=True)
class ExponentFit:
    """Ordinary least squares on (log n, log estimate)."""

    slope: float
    intercept: float
    r_squared: float
    residual_max: float
    grid: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "residual_max": self.residual_max,
            "grid": list(self.grid),
        }


def fit_exponent(points: Sequence[tuple[float, float]]) -> ExponentFit:
    """Fit estimate ~ C * n^slope by OLS on the log-log scale."""
    if len(points) < 3:
        raise ValueError(f"exponent fits need at least 3 points, got {len(points)}")
    ns = [float(n) for n, _ in points]
    for prev, cur in zip(ns, ns[1:]):
        if cur <= prev:
            raise ValueError("the n grid must be strictly increasing")
    for n, v in points:
        if not v > 0:
            raise ValueError(f"nonpositive estimate {v} at n={n}; cannot fit on the log scale")
    log_n = np.log([n for n, _ in points])
    log_v = np.log([v for _, v in points])
    slope, intercept = np.polyfit(log_n, log_v, 1)
    resid = log_v - (slope * log_n + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((log_v - log_v.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return ExponentFit(
        slope=float(slope),
        intercept=float(intercept),
        r_squared=r_squared,
        residual_max=float(np.max(np.abs(resid))),
        grid=tuple(int(n) for n, _ in points),
    )


@dataclass(frozen=True)
class SweepResult:
    """Estimates over an n grid, with a log-log exponent fit when possible."""

    rows: tuple[tuple[int, MCEstimate], ...]
    fit: Optional[ExponentFit]
    gamma: float

    def to_csv(self, fh: IO[str]) -> None:
        writer = csv.writer(fh)
        writer.writerow(["n", "mean", "stderr", "reps", "seed", "scenario_id"])
        for n, est in self.rows:
            writer.writerow([n, repr(est.mean), repr(est.stderr), est.reps, est.master_seed, est.meta])

    def to_dict(self) -> dict:
        return {
            "rows": [{"n": n, **est.to_dict()} for n, est in self.rows],
            "fit": None if self.fit is None else self.fit.to_dict(),
            "gamma": self.gamma,
        }


def sweep(
    scenario_template: Scenario,
    n_grid: Sequence[int],
    gamma: float,
    reps: int,
    master_seed: int,
    threads: int = 1,
) -> SweepResult:
    """Run estimate_moment per n on a grid; attach the log-log fit for >= 3 points."""
    grid = [int(n) for n in n_grid]
    if not grid:
        raise ValueError("the n grid must not be empty")
    for prev, cur in zip(grid, grid[1:]):
        if cur <= prev:
            raise ValueError("the n grid must be strictly increasing")
    rows = []
    for n in grid:
        scenario = replace(scenario_template, n=n)
        rows.append((n, estimate_moment(scenario, gamma, reps, master_seed, threads=threads)))
    fit = None
    if len(rows) >= 3 and all(est.mean > 0 for _, est in rows):
        fit = fit_exponent([(n, est.mean) for n, est in rows])
    return SweepResult(rows=tuple(rows), fit=fit, gamma=gamma)
