"""Couplings of truncated Hilbert-valued increments with Gaussian increments.

Every increment model has independent coordinates with mean zero and
variance sigma_m^2 taken from a spectrum, truncated to ``dim`` coordinates:

* ``lattice3``  -- values {-step, 0, +step} with P{+-step} = sigma_m^2/(2 step^2)
* ``twopoint``  -- values +-sigma_m with probability 1/2
* ``gaussian``  -- N(0, sigma_m^2)
* ``uniform``   -- uniform on [-sqrt(3) sigma_m, sqrt(3) sigma_m]

Couplings are explicit comonotone quantile couplings: one shared uniform
variate per coordinate and per increment drives both marginals through their
quantile functions (the distributional transform handles atoms), so the
Gaussian partner always has exactly matching mean and covariance.  The
coupling discrepancy is measured, never asserted against any theoretical
rate.

Lattice increments are bookkept as integer multiples of the step so partial
sums of the lattice side stay exact.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import IO, Iterable, Optional

import numpy as np
from scipy import special

from .spectra import Spectrum

__all__ = [
    "CouplingPaths",
    "IncrementModel",
    "MarginPoint",
    "RosenthalCheck",
    "couple_quantile",
    "delta_n",
    "dump_paths",
    "empirical_check_montgomery_smith",
    "empirical_check_rosenthal",
    "inv_phi",
    "norm_moment",
    "sample_increments",
]

MODEL_KINDS = ("lattice3", "twopoint", "gaussian", "uniform")

_SQRT2PI = math.sqrt(2.0 * math.pi)
_ENUM_CAP = 1 << 20

# Acklam's rational approximation of the standard normal quantile
# (relative error < 1.15e-9), followed by one Newton step on the CDF.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def inv_phi(u) -> np.ndarray:
    """Standard normal quantile function, accurate to a few ulp.

    Rational initial guess plus one Newton step on the CDF; arguments above
    1/2 are reflected (1-u is exact there), which keeps the far upper tail
    from losing precision to cancellation.
    """
    u = np.asarray(u, dtype=np.float64)
    scalar = u.ndim == 0
    u = np.atleast_1d(u)
    if np.any((u < 0.0) | (u > 1.0)):
        raise ValueError("inv_phi needs arguments in [0, 1]")
    flip = u > 0.5
    p = np.where(flip, 1.0 - u, u)
    x = np.empty_like(p)

    zero = p == 0.0
    low = (p < _P_LOW) & ~zero
    mid = ~(low | zero)
    if np.any(mid):
        q = p[mid] - 0.5
        r = q * q
        num = ((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        x[mid] = q * num / den
    if np.any(low):
        q = np.sqrt(-2.0 * np.log(p[low]))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        x[low] = num / den
    if np.any(zero):
        x[zero] = -np.inf

    refine = ~zero
    if np.any(refine):
        xr = x[refine]
        err = special.ndtr(xr) - p[refine]
        x[refine] = xr - err * _SQRT2PI * np.exp(0.5 * xr * xr)

    out = np.where(flip, -x, x)
    return out[0] if scalar else out


def _uniform_open(rng: np.random.Generator, size) -> np.ndarray:
    # (k + 1/2) * 2^-53 lies strictly inside (0, 1) and is symmetric about 1/2
    return (rng.integers(0, 1 << 53, size=size).astype(np.float64) + 0.5) * 2.0**-53


@dataclass(frozen=True)
class IncrementModel:
    """Law of one truncated Hilbert-valued increment with independent coordinates."""

    kind: str
    spectrum: Spectrum
    dim: int
    lattice_step: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"model kind must be one of {MODEL_KINDS}, got {self.kind!r}")
        if self.dim < 1:
            raise ValueError(f"truncation dimension must be >= 1, got {self.dim}")
        if self.kind == "lattice3":
            if self.lattice_step is None or self.lattice_step <= 0:
                raise ValueError("lattice3 needs a positive lattice_step")
            if self.spectrum.sigma_sq(1) > self.lattice_step**2:
                raise ValueError(
                    f"lattice3 needs sigma_1^2 <= step^2 for valid probabilities "
                    f"(sigma_1^2={self.spectrum.sigma_sq(1)}, step^2={self.lattice_step**2})"
                )
        elif self.lattice_step is not None:
            raise ValueError(f"lattice_step only applies to lattice3, not {self.kind!r}")

    @cached_property
    def variances(self) -> np.ndarray:
        return self.spectrum.sigma_sq_head(self.dim)

    @cached_property
    def sds(self) -> np.ndarray:
        return np.sqrt(self.variances)

    def label(self) -> str:
        base = f"{self.kind}({self.spectrum.spec_string()},D={self.dim}"
        if self.lattice_step is not None:
            base += f",step={self.lattice_step!r}"
        return base + ")"

    def quantile(self, u: np.ndarray) -> np.ndarray:
        """Coordinate-wise quantile transform of uniforms shaped (..., dim)."""
        if u.shape[-1] != self.dim:
            raise ValueError(f"last axis must have length {self.dim}, got {u.shape}")
        if self.kind == "gaussian":
            return self.sds * inv_phi(u)
        if self.kind == "twopoint":
            return np.where(u < 0.5, -self.sds, self.sds)
        if self.kind == "uniform":
            return math.sqrt(3.0) * self.sds * (2.0 * u - 1.0)
        return self.lattice_step * self.lattice_units(u)

    def lattice_units(self, u: np.ndarray) -> np.ndarray:
        """Lattice increments in units of the step (int8 in {-1, 0, 1})."""
        if self.kind != "lattice3":
            raise ValueError("lattice_units applies to lattice3 models only")
        p = self.variances / self.lattice_step**2
        return (u >= 1.0 - 0.5 * p).astype(np.int8) - (u < 0.5 * p).astype(np.int8)

    def support(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        """(values, probabilities) of coordinate m for finitely supported kinds."""
        var = self.variances[m - 1]
        if self.kind == "twopoint":
            s = math.sqrt(var)
            return np.array([-s, s]), np.array([0.5, 0.5])
        if self.kind == "lattice3":
            lam = self.lattice_step
            p = var / lam**2
            return np.array([-lam, 0.0, lam]), np.array([p / 2, 1.0 - p, p / 2])
        raise ValueError(f"{self.kind!r} has no finite support")


def norm_moment(model: IncrementModel, gamma: float) -> float:
    """E ||Z||^gamma of the truncated increment, in closed form.

    Covered exactly: gamma = 2 (the variance trace), gamma = 4 (fourth-moment
    expansion over independent coordinates), any gamma for twopoint (the norm
    is a.s. constant) and for one-dimensional gaussian models.
    """
    var = model.variances
    total = float(np.sum(var))
    if gamma == 2:
        return total
    if model.kind == "twopoint":
        return total ** (gamma / 2.0)
    if gamma == 4:
        if model.kind == "gaussian":
            fourth = 3.0 * var**2
        elif model.kind == "uniform":
            fourth = 1.8 * var**2
        else:
            fourth = model.lattice_step**2 * var
        return float(np.sum(fourth - var**2)) + total**2
    if model.kind == "gaussian" and model.dim == 1:
        half = gamma / 2.0
        return total**half * 2.0**half * special.gamma((gamma + 1.0) / 2.0) / math.sqrt(math.pi)
    raise NotImplementedError(
        f"closed-form norm moment not available for kind={model.kind!r}, "
        f"gamma={gamma}, dim={model.dim}"
    )


@dataclass(frozen=True)
class CouplingPaths:
    """One coupled path: increments, partial sums, and realized discrepancies.

    ``sx``/``sy`` are the stored partial sums (sequential accumulation; for
    lattice models ``sx`` is an exact integer accumulation scaled once by the
    step).  ``delta`` / ``delta_inf`` are the maximal l2 / sup norms of
    ``sx - sy``.
    """

    model: IncrementModel
    x: np.ndarray
    y: np.ndarray
    sx: np.ndarray
    sy: np.ndarray
    delta: float
    delta_inf: float
    x_units: Optional[np.ndarray] = None
    sx_units: Optional[np.ndarray] = None
    u: Optional[np.ndarray] = None

    @property
    def count(self) -> int:
        return self.x.shape[0]


def _max_norms(diff: np.ndarray) -> tuple[float, float]:
    norms = np.sqrt(np.sum(diff * diff, axis=1))
    return float(norms.max(initial=0.0)), float(np.abs(diff).max(initial=0.0))


def delta_n(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Maximal l2-norm and sup-norm discrepancy of the coupled partial sums."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 2:
        raise ValueError(f"increment arrays must share an (n, D) shape, got {x.shape} vs {y.shape}")
    return _max_norms(np.add.accumulate(x - y, axis=0))


def sample_increments(model: IncrementModel, count: int, rng: np.random.Generator) -> np.ndarray:
    """(count, dim) array of i.i.d. increments drawn via the quantile transform."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    return model.quantile(_uniform_open(rng, (count, model.dim)))


def couple_quantile(
    model: IncrementModel,
    count: int,
    rng: np.random.Generator,
    keep_uniforms: bool = False,
) -> CouplingPaths:
    """Comonotone quantile coupling of ``count`` increments with Gaussians.

    Per coordinate and increment one shared uniform drives both marginals:
    the Gaussian side through sigma_m * inv_phi(U), the model side through
    its own quantile function.  For gaussian models the two sides coincide
    bitwise, so the realized discrepancy is exactly zero.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    u = _uniform_open(rng, (count, model.dim))
    y = model.sds * inv_phi(u)
    sy = np.add.accumulate(y, axis=0)
    x_units = sx_units = None
    if model.kind == "gaussian":
        x, sx = y, sy
    elif model.kind == "lattice3":
        x_units = model.lattice_units(u)
        sx_units = np.add.accumulate(x_units.astype(np.int64), axis=0)
        x = model.lattice_step * x_units
        sx = model.lattice_step * sx_units
    else:
        x = model.quantile(u)
        sx = np.add.accumulate(x, axis=0)
    delta, delta_inf = _max_norms(sx - sy)
    return CouplingPaths(
        model=model,
        x=x,
        y=y,
        sx=sx,
        sy=sy,
        delta=delta,
        delta_inf=delta_inf,
        x_units=x_units,
        sx_units=sx_units,
        u=u if keep_uniforms else None,
    )


def dump_paths(paths: CouplingPaths, fh: IO[str], seed: Optional[int] = None) -> None:
    """CSV dump with columns j, m, X, Y; the first line records model and seed."""
    fh.write(f"# model={paths.model.label()} seed={seed}\n")
    writer = csv.writer(fh)
    writer.writerow(["j", "m", "X", "Y"])
    n, dim = paths.x.shape
    for j in range(n):
        for m in range(dim):
            writer.writerow([j + 1, m + 1, repr(float(paths.x[j, m])), repr(float(paths.y[j, m]))])


# --------------------------------------------------------------------------
# exhaustive enumeration over finitely supported models
# --------------------------------------------------------------------------


def _enumerate_paths(model: IncrementModel, count: int) -> Iterable[tuple[float, np.ndarray]]:
    """Yield (probability, increments) over all outcomes of a finite-support model."""
    supports = [model.support(m) for m in range(1, model.dim + 1)]
    sizes = [len(v) for v, _ in supports]
    total_states = math.prod(sizes) ** count
    if total_states > _ENUM_CAP:
        raise ValueError(
            f"enumeration would visit {total_states} outcomes (cap {_ENUM_CAP}); "
            "reduce n or the dimension"
        )
    cells = list(itertools.product(*(range(s) for s in sizes)))
    cell_values = np.array(
        [[supports[m][0][ix] for m, ix in enumerate(cell)] for cell in cells]
    )
    cell_probs = np.array(
        [math.prod(supports[m][1][ix] for m, ix in enumerate(cell)) for cell in cells]
    )
    for rows in itertools.product(range(len(cells)), repeat=count):
        prob = math.prod(cell_probs[r] for r in rows)
        if prob == 0.0:
            continue
        yield prob, cell_values[list(rows)]


# --------------------------------------------------------------------------
# empirical inequality checks
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MarginPoint:
    """One grid point of the maximal-vs-final tail comparison."""

    x: float
    prob_max: float
    prob_final: float  # tail of ||S_n|| at threshold x / 30
    margin: float  # prob_max - 9 * prob_final  (nonpositive when the inequality holds)
    stderr: float

    def to_dict(self) -> dict:
        return {
            "x": self.x,
            "prob_max": self.prob_max,
            "prob_final": self.prob_final,
            "margin": self.margin,
            "stderr": self.stderr,
        }


def empirical_check_montgomery_smith(
    model: IncrementModel,
    n: int,
    x_grid,
    reps: int,
    rng: Optional[np.random.Generator] = None,
    method: str = "mc",
) -> list[MarginPoint]:
    """Check P{max_s ||S_s|| > x} <= 9 P{||S_n|| > x/30} on a grid of x.

    Returns the margin (LHS - RHS estimate) with a binomial standard error
    per grid point; ``method='enumerate'`` computes both probabilities
    exactly for finitely supported models.
    """
    xs = [float(x) for x in x_grid]
    if any(x < 0 for x in xs):
        raise ValueError("thresholds must be nonnegative")
    if method == "enumerate":
        p_max = np.zeros(len(xs))
        p_fin = np.zeros(len(xs))
        for prob, path in _enumerate_paths(model, n):
            sums = np.add.accumulate(path, axis=0)
            max_norm = float(np.sqrt(np.sum(sums * sums, axis=1)).max())
            fin_norm = float(np.sqrt(np.sum(sums[-1] ** 2)))
            for i, x in enumerate(xs):
                p_max[i] += prob * (max_norm > x)
                p_fin[i] += prob * (fin_norm > x / 30.0)
        return [
            MarginPoint(x, float(pm), float(pf), float(pm - 9.0 * pf), 0.0)
            for x, pm, pf in zip(xs, p_max, p_fin)
        ]
    if method != "mc":
        raise ValueError(f"method must be 'mc' or 'enumerate', got {method!r}")
    if rng is None:
        raise ValueError("Monte Carlo mode needs an rng")
    if reps < 2:
        raise ValueError(f"reps must be >= 2, got {reps}")
    max_norms = np.empty(reps)
    fin_norms = np.empty(reps)
    block = max(1, 10**6 // (n * model.dim))
    done = 0
    while done < reps:
        take = min(block, reps - done)
        x = model.quantile(_uniform_open(rng, (take, n, model.dim)))
        sums = np.add.accumulate(x, axis=1)
        norms = np.sqrt(np.sum(sums * sums, axis=2))
        max_norms[done : done + take] = norms.max(axis=1)
        fin_norms[done : done + take] = norms[:, -1]
        done += take
    out = []
    for x in xs:
        pm = float(np.mean(max_norms > x))
        pf = float(np.mean(fin_norms > x / 30.0))
        se = math.sqrt((pm * (1 - pm) + 81.0 * pf * (1 - pf)) / reps)
        out.append(MarginPoint(x, pm, pf, pm - 9.0 * pf, se))
    return out


@dataclass(frozen=True)
class RosenthalCheck:
    """Moment of the full sum against its two-term independent-sum bound."""

    ratio: float
    stderr: float
    moment: float
    denominator: float
    n: int
    gamma: float
    method: str

    def to_dict(self) -> dict:
        return {
            "ratio": self.ratio,
            "stderr": self.stderr,
            "moment": self.moment,
            "denominator": self.denominator,
            "n": self.n,
            "gamma": self.gamma,
            "method": self.method,
        }


def empirical_check_rosenthal(
    model: IncrementModel,
    n: int,
    gamma: float,
    reps: int = 0,
    rng: Optional[np.random.Generator] = None,
    method: str = "mc",
) -> RosenthalCheck:
    """Estimate E||S_n||^gamma / (n E||Z||^gamma + (n B_0^2)^(gamma/2)).

    The denominator uses the truncated model's exact moments.  With
    ``method='enumerate'`` the numerator is an exact finite-support sum.
    """
    if gamma < 2:
        raise ValueError(f"gamma must be >= 2, got {gamma}")
    total_var = float(np.sum(model.variances))
    denom = n * norm_moment(model, gamma) + (n * total_var) ** (gamma / 2.0)
    if method == "enumerate":
        moment = 0.0
        for prob, path in _enumerate_paths(model, n):
            s = path.sum(axis=0)
            moment += prob * float(np.sum(s * s)) ** (gamma / 2.0)
        return RosenthalCheck(moment / denom, 0.0, moment, denom, n, gamma, "enumerate")
    if method != "mc":
        raise ValueError(f"method must be 'mc' or 'enumerate', got {method!r}")
    if rng is None:
        raise ValueError("Monte Carlo mode needs an rng")
    if reps < 2:
        raise ValueError(f"reps must be >= 2, got {reps}")
    vals = np.empty(reps)
    block = max(1, 10**6 // (n * model.dim))
    done = 0
    while done < reps:
        take = min(block, reps - done)
        x = model.quantile(_uniform_open(rng, (take, n, model.dim)))
        s = x.sum(axis=1)
        vals[done : done + take] = np.sum(s * s, axis=1) ** (gamma / 2.0)
        done += take
    moment = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(reps)) / denom
    return RosenthalCheck(moment / denom, se, moment, denom, n, gamma, "mc")
