"""Coupling-rate upper bounds, entry conditions, and exact rate exponents.

Three upper bounds for E(Delta_n)^gamma are evaluated (all with implied
constant fixed to 1, so every number below is an *order value*):

* theorem 3 -- finite-dimensional: A * (sigma_1/sigma_d)^gamma * n * E||Z||^g
  with A = max{d^(psi*g), d^(g(g+2)/4) * log_star(d)^(g(g+1)/2)};
* theorem 6 -- head/tail split using the whitened head moment
  E||D_d^{-1/2} Z^(d)||^g, plus n * E||Z^[d]||^g and (n B_d^2)^(g/2);
* theorem 9 -- the simpler variant using only E||Z||^g and the eigenvalues:
  d^(psi*g) (sigma_1/sigma_d)^g n E||Z||^g + (n B_d^2)^(g/2);

next to the trivial no-coupling benchmark n E||Z||^g + (n B_0^2)^(g/2).

Each bound comes with its entry condition

    C(gamma) d^(g/2) log_star(d)^(g+1) (moment)^(2/g)  <=  n^(1-2/g) [* sigma_d^2]

whose feasible set in d is a prefix of the integers, so the largest feasible
dimension is found by a forward scan with early exit.

Rate exponents for the five worked spectra families are produced as exact
rationals (`fractions.Fraction`), never floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Optional, Sequence

from .spectra import Spectrum, log_star

__all__ = [
    "BoundReport",
    "BoundTerm",
    "ConditionCheck",
    "MissingMomentError",
    "ProblemInstance",
    "RateComparison",
    "RateRegime",
    "RateReport",
    "ScanCapError",
    "WhitenedBound",
    "asymptotic_rate",
    "bound_thm3",
    "bound_thm6",
    "bound_thm9",
    "check_condition",
    "compare_lower_upper",
    "log_star",
    "sakhanenko_1d_bound",
    "select_dimension",
    "trivial_rosenthal_bound",
    "whitened_moment_bound",
]

OVERFLOW_LOG10 = 300.0
_LN10 = math.log(10.0)

CONDITION_VARIANTS = ("thm4", "thm6", "thm9")


class MissingMomentError(ValueError):
    """A bound needs a moment input that the instance does not carry."""


class ScanCapError(RuntimeError):
    """A dimension scan exceeded its cap without the condition failing."""


@dataclass(frozen=True)
class ProblemInstance:
    """One bound/simulation scenario: sample size, moments, and spectrum.

    ``whitened_moment`` maps d to E||D_d^{-1/2} Z^(d)||^gamma when known
    exactly; alternatively ``whitened_k`` gives the uniform constant K with
    E||D_d^{-1/2} Z^(d)||^gamma <= K * d^(gamma/2).  ``tail_moment`` maps d
    to E||Z^[d]||^gamma.  ``c_gamma`` is the unspecified entry-condition
    constant, configurable and surfaced in every report (default 1).
    """

    n: int
    gamma: float
    spectrum: Spectrum
    moment_z: float
    psi: float = 11.0
    whitened_moment: Optional[Callable[[int], float]] = None
    whitened_k: Optional[float] = None
    tail_moment: Optional[Callable[[int], float]] = None
    c_gamma: float = 1.0
    strict_moments: bool = False
    notes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if self.gamma < 2:
            raise ValueError(f"gamma must be >= 2, got {self.gamma}")
        if not 10.5 < self.psi <= 11.0:
            raise ValueError(f"psi must lie in (10.5, 11], got {self.psi}")
        if self.moment_z < 0:
            raise ValueError(f"E||Z||^gamma must be >= 0, got {self.moment_z}")
        if self.c_gamma < 0:
            raise ValueError(f"c_gamma must be >= 0, got {self.c_gamma}")
        if self.whitened_k is not None and self.whitened_k <= 0:
            raise ValueError(f"whitened_k must be > 0, got {self.whitened_k}")
        # Lyapunov consistency: any genuine Z has E||Z||^g >= (E||Z||^2)^(g/2).
        # Order-normalized inputs (moment 1 next to an unscaled spectrum) are
        # common, so by default an inconsistency is recorded, not rejected.
        floor = self.spectrum.total_variance() ** (self.gamma / 2.0)
        if self.moment_z < floor * (1.0 - 1e-9):
            message = (
                f"moment_z={self.moment_z} sits below the Lyapunov floor "
                f"(B_0^2)^(gamma/2)={floor}; no distribution attains both"
            )
            if self.strict_moments:
                raise ValueError(message)
            object.__setattr__(self, "notes", self.notes + (message,))

    def whitened(self, d: int) -> Optional[float]:
        """Resolve E||D_d^{-1/2} Z^(d)||^gamma for this d, if available."""
        if self.whitened_moment is not None:
            return float(self.whitened_moment(d))
        if self.whitened_k is not None:
            return self.whitened_k * d ** (self.gamma / 2.0)
        return None


@dataclass(frozen=True)
class ConditionCheck:
    """Entry-condition verdict with both numeric sides."""

    variant: str
    d: int
    lhs: float
    rhs: float
    ok: bool
    c_gamma: float

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "d": self.d,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "ok": self.ok,
            "c_gamma": self.c_gamma,
        }


@dataclass(frozen=True)
class BoundTerm:
    """One right-hand-side summand, with a log10 magnitude for huge values."""

    name: str
    value: float  # math.inf when the magnitude exceeds the overflow threshold
    log10: Optional[float]  # None for an exactly zero term
    overflow: bool = False

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value if math.isfinite(self.value) else "overflow",
            "log10": self.log10,
            "overflow": self.overflow,
        }


@dataclass(frozen=True)
class BoundReport:
    """Evaluated right-hand side of one upper bound (implied constant 1)."""

    theorem_id: str
    d: int
    condition: Optional[ConditionCheck]
    terms: tuple[BoundTerm, ...]
    total: float
    total_log10: Optional[float]
    notes: tuple[str, ...] = ()

    @property
    def condition_ok(self) -> Optional[bool]:
        return None if self.condition is None else self.condition.ok

    @property
    def has_overflow(self) -> bool:
        return any(t.overflow for t in self.terms)

    def to_dict(self) -> dict:
        return {
            "theorem_id": self.theorem_id,
            "d": self.d,
            "condition_ok": self.condition_ok,
            "condition": None if self.condition is None else self.condition.to_dict(),
            "terms": [t.to_dict() for t in self.terms],
            "total": self.total if math.isfinite(self.total) else "overflow",
            "total_log10": self.total_log10,
            "notes": list(self.notes),
        }


def _term_from_log(name: str, ln_value: Optional[float]) -> BoundTerm:
    """Build a term from its natural log (None or -inf meaning exactly zero)."""
    if ln_value is None or ln_value == -math.inf:
        return BoundTerm(name, 0.0, None)
    log10 = ln_value / _LN10
    if log10 > OVERFLOW_LOG10:
        return BoundTerm(name, math.inf, log10, overflow=True)
    return BoundTerm(name, math.exp(ln_value), log10)


def _assemble(theorem_id, d, condition, named_logs, notes=()) -> BoundReport:
    terms = tuple(_term_from_log(name, ln) for name, ln in named_logs)
    finite_logs = [ln for _, ln in named_logs if ln is not None and ln > -math.inf]
    if not finite_logs:
        total, total_log10 = 0.0, None
    else:
        peak = max(finite_logs)
        ln_total = peak + math.log(math.fsum(math.exp(ln - peak) for ln in finite_logs))
        total_log10 = ln_total / _LN10
        total = math.inf if total_log10 > OVERFLOW_LOG10 else math.exp(ln_total)
    if any(t.overflow for t in terms):
        notes = tuple(notes) + (f"magnitude exceeds 1e{OVERFLOW_LOG10:.0f}; see log10 fields",)
    return BoundReport(theorem_id, d, condition, terms, total, total_log10, tuple(notes))


def _ln(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


# --------------------------------------------------------------------------
# entry conditions and dimension selection
# --------------------------------------------------------------------------


def check_condition(variant: str, inst: ProblemInstance, d: int) -> ConditionCheck:
    """Evaluate the entry condition for one bound at dimension d.

    LHS = C(gamma) d^(g/2) log_star(d)^(g+1) * moment^(2/g) where the moment
    is the whitened head moment (thm4/thm6) or E||Z||^gamma (thm9); RHS is
    n^(1-2/g), times sigma_d^2 for thm9.
    """
    if variant not in CONDITION_VARIANTS:
        raise ValueError(f"variant must be one of {CONDITION_VARIANTS}, got {variant!r}")
    if d < 1:
        raise ValueError(f"condition checks need d >= 1, got {d}")
    g = inst.gamma
    if variant in ("thm6", "thm9") and g <= 2:
        raise ValueError(f"{variant} requires gamma > 2, got {g}")
    if variant in ("thm4", "thm6"):
        moment = inst.whitened(d)
        if moment is None:
            raise MissingMomentError(
                f"{variant} needs the whitened head moment for d={d}: supply "
                "whitened_moment or whitened_k (or bound it via whitened_moment_bound)"
            )
        rhs = inst.n ** (1.0 - 2.0 / g)
    else:
        moment = inst.moment_z
        sig_d = inst.spectrum.sigma_sq(d)
        if sig_d <= 0:
            raise ValueError(f"thm9 condition needs sigma_d^2 > 0 (d={d})")
        rhs = inst.n ** (1.0 - 2.0 / g) * sig_d
    lhs = (
        inst.c_gamma
        * d ** (g / 2.0)
        * log_star(float(d)) ** (g + 1.0)
        * moment ** (2.0 / g)
    )
    return ConditionCheck(variant, d, lhs, rhs, lhs <= rhs, inst.c_gamma)


def select_dimension(
    inst: ProblemInstance,
    strategy: str = "max-feasible",
    variant: str = "thm9",
    example_id: Optional[int] = None,
    scan_cap: int = 10**6,
) -> int:
    """Pick the truncation dimension d (0 = the no-approximation fallback).

    ``max-feasible`` returns the largest d >= 1 satisfying the chosen entry
    condition; the feasible set is a prefix of the integers (LHS nondecreasing
    in d, RHS nonincreasing), so a forward scan with early exit is exact.
    ``example-formula`` reproduces the worked dimension choices for the five
    spectra families (``example_id`` in 1..5).
    """
    if strategy == "max-feasible":
        best = 0
        d = 1
        while True:
            if variant == "thm9" and inst.spectrum.sigma_sq(d) <= 0:
                return best
            check = check_condition(variant, inst, d)
            if not check.ok:
                return best
            best = d
            d += 1
            if d > scan_cap:
                raise ScanCapError(
                    f"dimension scan exceeded cap {scan_cap} with the "
                    f"{variant} condition still satisfied"
                )
    if strategy == "example-formula":
        if example_id not in (1, 2, 3, 4, 5):
            raise ValueError("example-formula strategy needs example_id in 1..5")
        return _example_dimension(inst, example_id, scan_cap)
    raise ValueError(f"unknown strategy {strategy!r}")


def _prefix_max(pred, scan_cap: int) -> int:
    best = 0
    d = 1
    while pred(d):
        best = d
        d += 1
        if d > scan_cap:
            raise ScanCapError(f"dimension scan exceeded cap {scan_cap}")
    return best


def _example_dimension(inst: ProblemInstance, example_id: int, scan_cap: int) -> int:
    n, g, psi = inst.n, inst.gamma, inst.psi
    spec = inst.spectrum
    ln_n = math.log(n)
    if example_id == 1:
        if spec.kind != "exp":
            raise ValueError("example formula 1 applies to exponential spectra")
        beta = spec.params[1]
        # largest m with sigma_m^4 > n^(2/g - 1) * log_star(n)^(2 psi / beta)
        thresh = (2.0 / g - 1.0) * ln_n + (2.0 * psi / beta) * math.log(log_star(n))
        return _prefix_max(lambda m: 2.0 * spec.log_sigma_sq(m) > thresh, scan_cap)
    if example_id == 2:
        # first m with n * B_m^2 < 1 (the tail trace is nonincreasing in m)
        if n * spec.tail_variance(1) >= 1.0:
            lo, hi = 1, 2
            while n * spec.tail_variance(hi) >= 1.0:
                lo, hi = hi, hi * 2
                if hi > scan_cap:
                    raise ScanCapError(f"dimension scan exceeded cap {scan_cap}")
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if n * spec.tail_variance(mid) >= 1.0:
                    lo = mid
                else:
                    hi = mid
            return hi
        return 1
    if example_id == 3:
        # largest m with m^(2 psi - 1) < n^(1 - 2/g) * sigma_m^4
        rhs0 = (1.0 - 2.0 / g) * ln_n
        return _prefix_max(
            lambda m: (2.0 * psi - 1.0) * math.log(m) < rhs0 + 2.0 * spec.log_sigma_sq(m),
            scan_cap,
        )
    if example_id == 4:
        # largest m with m^(2 psi) < n^(1 - 2/g) * sigma_m^2
        rhs0 = (1.0 - 2.0 / g) * ln_n
        return _prefix_max(
            lambda m: 2.0 * psi * math.log(m) < rhs0 + spec.log_sigma_sq(m),
            scan_cap,
        )
    # example 5: d = integer part of n^eps, eps = (g-2)/(g(g+22)).
    gf = Fraction(g)
    eps = (gf - 2) / (gf * (gf + 22))
    d = int(n ** float(eps))
    if eps.denominator <= 10**6:
        p, q = eps.numerator, eps.denominator
        while (d + 1) ** q <= n**p:
            d += 1
        while d >= 1 and d**q > n**p:
            d -= 1
    return d


# --------------------------------------------------------------------------
# bound evaluation
# --------------------------------------------------------------------------


def bound_thm9(inst: ProblemInstance, d: int) -> BoundReport:
    """d^(psi g) (sigma_1/sigma_d)^g n E||Z||^g + (n B_d^2)^(g/2)."""
    g = inst.gamma
    ln_s1 = inst.spectrum.log_sigma_sq(1)
    ln_sd = inst.spectrum.log_sigma_sq(d)
    if ln_sd == -math.inf:
        raise ValueError(f"theorem 9 bound needs sigma_d^2 > 0 (d={d})")
    head = inst.psi * g * math.log(d) + 0.5 * g * (ln_s1 - ln_sd) + math.log(inst.n) + _ln(inst.moment_z)
    tail_var = inst.spectrum.tail_variance(d)
    tail = 0.5 * g * (math.log(inst.n) + _ln(tail_var)) if tail_var > 0 else -math.inf
    condition = check_condition("thm9", inst, d)
    return _assemble(
        "thm9",
        d,
        condition,
        [("coupled_head", head), ("gaussian_tail", tail)],
    )


def bound_thm6(inst: ProblemInstance, d: int) -> BoundReport:
    """d^(psi g) n sigma_1^g W(d) + n E||Z^[d]||^g + (n B_d^2)^(g/2)."""
    g = inst.gamma
    w = inst.whitened(d)
    if w is None:
        raise MissingMomentError(
            "theorem 6 bound needs E||D_d^{-1/2} Z^(d)||^gamma: supply "
            "whitened_moment or whitened_k, or bound it via whitened_moment_bound"
        )
    tail_var = inst.spectrum.tail_variance(d)
    if inst.tail_moment is not None:
        tail_mom = float(inst.tail_moment(d))
    elif tail_var == 0.0:
        tail_mom = 0.0  # Z^[d] vanishes a.s. when its variance trace is zero
    else:
        raise MissingMomentError(
            "theorem 6 bound needs E||Z^[d]||^gamma for this d: supply tail_moment"
        )
    head = (
        inst.psi * g * math.log(d)
        + math.log(inst.n)
        + 0.5 * g * inst.spectrum.log_sigma_sq(1)
        + _ln(w)
    )
    mid = math.log(inst.n) + _ln(tail_mom) if tail_mom > 0 else -math.inf
    tail = 0.5 * g * (math.log(inst.n) + _ln(tail_var)) if tail_var > 0 else -math.inf
    condition = check_condition("thm6", inst, d)
    return _assemble(
        "thm6",
        d,
        condition,
        [("coupled_head", head), ("tail_moment", mid), ("gaussian_tail", tail)],
    )


def bound_thm3(inst: ProblemInstance, d: int) -> BoundReport:
    """A(gamma, psi, d) * (sigma_1/sigma_d)^g * n * E||Z||^g (gamma >= 2 allowed)."""
    g = inst.gamma
    ln_s1 = inst.spectrum.log_sigma_sq(1)
    ln_sd = inst.spectrum.log_sigma_sq(d)
    if ln_sd == -math.inf:
        raise ValueError(f"theorem 3 bound needs sigma_d^2 > 0 (d={d})")
    ln_d = math.log(d)
    ln_a = max(
        inst.psi * g * ln_d,
        0.25 * g * (g + 2.0) * ln_d + 0.5 * g * (g + 1.0) * math.log(log_star(float(d))),
    )
    term = ln_a + 0.5 * g * (ln_s1 - ln_sd) + math.log(inst.n) + _ln(inst.moment_z)
    return _assemble("thm3", d, None, [("dimension_penalty", term)])


def trivial_rosenthal_bound(inst: ProblemInstance) -> BoundReport:
    """The no-coupling benchmark n E||Z||^g + (n B_0^2)^(g/2) (d = 0 fallback)."""
    g = inst.gamma
    total_var = inst.spectrum.total_variance()
    t1 = math.log(inst.n) + _ln(inst.moment_z)
    t2 = 0.5 * g * (math.log(inst.n) + _ln(total_var)) if total_var > 0 else -math.inf
    return _assemble(
        "trivial",
        0,
        None,
        [("summand_moments", t1), ("variance_power", t2)],
        notes=("no-coupling benchmark via the maximal-sum moment bound",),
    )


@dataclass(frozen=True)
class WhitenedBound:
    """Upper bound for the whitened head moment, with its Lyapunov floor."""

    value: float
    lyapunov_floor: float
    mode: str

    def to_dict(self) -> dict:
        return {"value": self.value, "lyapunov_floor": self.lyapunov_floor, "mode": self.mode}


def whitened_moment_bound(
    inst: ProblemInstance,
    d: int,
    mode: str,
    coord_moment_ratios: Optional[Sequence[float] | Callable[[int], float]] = None,
) -> WhitenedBound:
    """Bound E||D_d^{-1/2} Z^(d)||^gamma when it is not known exactly.

    ``crude`` uses sigma_d^{-gamma} E||Z||^gamma; ``independent`` uses
    d^(gamma/2) + sum_{m<=d} E|Z_m|^gamma / sigma_m^gamma and needs the
    per-coordinate ratios.  Every value sits above the Lyapunov floor
    d^(gamma/2).
    """
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    g = inst.gamma
    floor = d ** (g / 2.0)
    if mode == "crude":
        ln_sd = inst.spectrum.log_sigma_sq(d)
        if ln_sd == -math.inf:
            raise ValueError(f"crude whitened bound needs sigma_d > 0 (d={d})")
        value = math.exp(-0.5 * g * ln_sd + _ln(inst.moment_z))
        return WhitenedBound(value, floor, "crude")
    if mode == "independent":
        if coord_moment_ratios is None:
            raise MissingMomentError(
                "independent mode needs per-coordinate ratios E|Z_m|^gamma / sigma_m^gamma"
            )
        if callable(coord_moment_ratios):
            ratios = [float(coord_moment_ratios(m)) for m in range(1, d + 1)]
        else:
            ratios = [float(r) for r in coord_moment_ratios[:d]]
            if len(ratios) < d:
                raise ValueError(f"need {d} coordinate ratios, got {len(ratios)}")
        value = floor + math.fsum(ratios)
        return WhitenedBound(value, floor, "independent")
    raise ValueError(f"mode must be 'crude' or 'independent', got {mode!r}")


def sakhanenko_1d_bound(gamma: float, per_summand_moments: Sequence[float]) -> float:
    """One-dimensional benchmark: the summed gamma-moments of the increments."""
    if gamma <= 2:
        raise ValueError(f"gamma must exceed 2, got {gamma}")
    moments = [float(m) for m in per_summand_moments]
    if any(m < 0 for m in moments):
        raise ValueError("per-summand moments must be nonnegative")
    return math.fsum(moments)


# --------------------------------------------------------------------------
# exact rate exponents for the worked spectra families
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RateRegime:
    """One asymptotic regime: order n^(n_power) * log_star(n)^(log_power)."""

    name: str
    n_power: Fraction
    log_power: Fraction
    formula: str

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n_power": str(self.n_power),
            "log_power": str(self.log_power),
            "formula": self.formula,
        }


@dataclass(frozen=True)
class RateReport:
    """Exact rate exponents for one worked example family."""

    example_id: int
    regimes: tuple[RateRegime, ...]
    auxiliary: Mapping[str, Fraction]
    window_ok: Optional[bool] = None
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "example_id": self.example_id,
            "regimes": [r.to_dict() for r in self.regimes],
            "auxiliary": {k: str(v) for k, v in self.auxiliary.items()},
            "window_ok": self.window_ok,
            "notes": list(self.notes),
        }


def _frac(x, name: str) -> Fraction:
    """Exact conversion; floats convert to their exact binary value."""
    try:
        return Fraction(x)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"cannot interpret {name}={x!r} as an exact rational") from exc


def _rate_params(gamma, psi) -> tuple[Fraction, Fraction]:
    g = _frac(gamma, "gamma")
    p = _frac(psi, "psi")
    if g <= 2:
        raise ValueError(f"rate exponents need gamma > 2, got {gamma}")
    if not Fraction(21, 2) < p <= 11:
        raise ValueError(f"psi must lie in (21/2, 11], got {psi}")
    return g, p


def asymptotic_rate(
    example_id: int,
    *,
    gamma,
    psi=11,
    alpha=None,
    beta=None,
    b=None,
    tau=None,
) -> RateReport:
    """Exact rational rate exponents for E(Delta_n)^gamma in examples 1-5.

    Exponents are powers of n and of log_star(n); every rational is exact.
    Examples 3 and 4 carry the validity window gamma < 2(b - 1 + 2 psi); a
    violated window marks the report "condition regime only".
    """
    g, p = _rate_params(gamma, psi)
    if example_id in (1, 2):
        if beta is None:
            raise ValueError(f"example {example_id} needs the exponential shape beta")
        bt = _frac(beta, "beta")
        if bt <= 0:
            raise ValueError(f"beta must be positive, got {beta}")
        aux = {"gamma": g, "psi": p, "beta": bt}
        if alpha is not None:
            aux["alpha"] = _frac(alpha, "alpha")
        if example_id == 1:
            regime = RateRegime(
                "main",
                (2 + g) / 4,
                p * g / (2 * bt),
                "n^((2+gamma)/4) * log_star(n)^(psi*gamma/(2*beta))",
            )
        else:
            regime = RateRegime(
                "main",
                Fraction(1),
                (2 * p + 1) * g / (2 * bt),
                "n * log_star(n)^((2*psi+1)*gamma/(2*beta))  [uniform whitened moments]",
            )
        return RateReport(example_id, (regime,), aux)
    if example_id in (3, 4):
        if b is None:
            raise ValueError(f"example {example_id} needs the polynomial decay b")
        bb = _frac(b, "b")
        if bb <= 1:
            raise ValueError(f"b must exceed 1, got {b}")
        window_ok = g < 2 * (bb - 1 + 2 * p)
        notes = () if window_ok else ("condition regime only",)
        if example_id == 3:
            r = (bb - 1) / (2 * bb - 1 + 2 * p)
            d = 2 * (bb - 1) / (2 * bb + g)
            aux = {"gamma": g, "psi": p, "b": bb, "r": r, "delta": d}
            regimes = (
                RateRegime(
                    "primary",
                    (g - r * (g - 2)) / 2,
                    Fraction(0),
                    "n^((gamma - r(gamma-2))/2)",
                ),
                RateRegime(
                    "reduced-dimension",
                    (g - d * (g - 2)) / 2,
                    d * g * (g + 1) / 2,
                    "n^((gamma - delta(gamma-2))/2) * log_star(n)^(delta*gamma*(gamma+1)/2)",
                ),
            )
        else:
            rho = (bb - 1) / (bb + 2 * p)
            mu = 2 * (bb - 1) / (2 + g)
            aux = {"gamma": g, "psi": p, "b": bb, "rho": rho, "mu": mu}
            regimes = (
                RateRegime(
                    "primary",
                    (g - rho * (g - 2)) / 2,
                    Fraction(0),
                    "n^((gamma - rho(gamma-2))/2)  [uniform whitened moments]",
                ),
                RateRegime(
                    "reduced-dimension",
                    (g - mu * (g - 2)) / 2,
                    mu * g * (g + 1) / 2,
                    "n^((gamma - mu(gamma-2))/2) * log_star(n)^(mu*gamma*(gamma+1)/2)",
                ),
            )
        return RateReport(example_id, regimes, aux, window_ok=window_ok, notes=notes)
    if example_id == 5:
        if tau is None:
            raise ValueError("example 5 needs the logarithmic decay tau")
        tt = _frac(tau, "tau")
        if tt <= 0:
            raise ValueError(f"tau must be positive, got {tau}")
        eps = (g - 2) / (g * (g + 22))
        aux = {"gamma": g, "psi": p, "tau": tt, "epsilon": eps}
        regime = RateRegime(
            "main",
            g / 2,
            -tt * g / 2,
            "(n / log_star(n)^tau)^(gamma/2)",
        )
        return RateReport(5, (regime,), aux)
    raise ValueError(f"example_id must be in 1..5, got {example_id}")


@dataclass(frozen=True)
class RateComparison:
    """Lower-bound order next to the upper bound, with a tightness flag."""

    example_id: int
    lower: RateRegime
    upper: RateRegime
    tight: bool
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "example_id": self.example_id,
            "lower": self.lower.to_dict(),
            "upper": self.upper.to_dict(),
            "tight": self.tight,
            "note": self.note,
        }


def compare_lower_upper(
    example_id: int,
    *,
    gamma,
    psi=11,
    alpha=None,
    beta=None,
    b=None,
    tau=None,
) -> RateComparison:
    """Compare the lattice lower-bound order (n B_k^2)^(gamma/2) with the upper rate."""
    g, _ = _rate_params(gamma, psi)
    if example_id == 1:
        upper = asymptotic_rate(1, gamma=gamma, psi=psi, alpha=alpha, beta=beta).regimes[0]
        lower = RateRegime(
            "lattice-tail",
            Fraction(0),
            Fraction(0),
            "(n B_k^2)^(gamma/2) stays bounded up to polylog factors",
        )
        return RateComparison(1, lower, upper, tight=False, note="far from the upper bound")
    if example_id == 3:
        bb = _frac(b, "b")
        upper = asymptotic_rate(3, gamma=gamma, psi=psi, b=b).regimes[0]
        lower = RateRegime("lattice-tail", g / (2 * bb), Fraction(0), "n^(gamma/(2b))")
        return RateComparison(
            3,
            lower,
            upper,
            tight=False,
            note="upper bounds grow with gamma; the gap closes toward n^(gamma/4) "
            "for large gamma and b",
        )
    if example_id == 5:
        tt = _frac(tau, "tau")
        upper = asymptotic_rate(5, gamma=gamma, psi=psi, tau=tau).regimes[0]
        lower = RateRegime(
            "lattice-tail",
            g / 2,
            -tt * g / 2,
            "(n / log_star(n)^tau)^(gamma/2)",
        )
        tight = lower.n_power == upper.n_power and lower.log_power == upper.log_power
        return RateComparison(
            5, lower, upper, tight=tight, note="upper and lower orders coincide"
        )
    raise ValueError(f"lower/upper comparison covers examples 1, 3, 5; got {example_id}")
