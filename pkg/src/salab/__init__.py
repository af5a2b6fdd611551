"""Coupling rates for Hilbert-valued partial sums.

Library + CLI for strong Gaussian approximation experiments: covariance
spectra with certified tail traces, theorem-style upper bounds with exact
rational rate exponents, explicit quantile couplings with measured
discrepancies, and a lattice construction that certifies lower bounds
pathwise.
"""

from .bounds import (
    BoundReport,
    ConditionCheck,
    MissingMomentError,
    ProblemInstance,
    RateComparison,
    RateReport,
    ScanCapError,
    WhitenedBound,
    asymptotic_rate,
    bound_thm3,
    bound_thm6,
    bound_thm9,
    check_condition,
    compare_lower_upper,
    sakhanenko_1d_bound,
    select_dimension,
    trivial_rosenthal_bound,
    whitened_moment_bound,
)
from .lowerbound import (
    LatticeInstance,
    LowerMomentBound,
    USummary,
    build_lattice_instance,
    certified_delta_lower,
    eta_moments,
    feller_floor,
    lower_moment_bound,
    simulate_U,
)
from .mc import (
    ExponentFit,
    MCEstimate,
    Scenario,
    SweepResult,
    estimate_moment,
    fit_exponent,
    substream,
    sweep,
)
from .simulate import (
    CouplingPaths,
    IncrementModel,
    couple_quantile,
    delta_n,
    dump_paths,
    empirical_check_montgomery_smith,
    empirical_check_rosenthal,
    inv_phi,
    norm_moment,
    sample_increments,
)
from .spectra import Spectrum, SpectrumError, TruncationCapError, log_star

__version__ = "0.1.0"

__all__ = [
    "BoundReport",
    "ConditionCheck",
    "CouplingPaths",
    "ExponentFit",
    "IncrementModel",
    "LatticeInstance",
    "LowerMomentBound",
    "MCEstimate",
    "MissingMomentError",
    "ProblemInstance",
    "RateComparison",
    "RateReport",
    "Scenario",
    "ScanCapError",
    "Spectrum",
    "SpectrumError",
    "SweepResult",
    "TruncationCapError",
    "USummary",
    "WhitenedBound",
    "asymptotic_rate",
    "bound_thm3",
    "bound_thm6",
    "bound_thm9",
    "build_lattice_instance",
    "certified_delta_lower",
    "check_condition",
    "compare_lower_upper",
    "couple_quantile",
    "delta_n",
    "dump_paths",
    "empirical_check_montgomery_smith",
    "empirical_check_rosenthal",
    "estimate_moment",
    "eta_moments",
    "feller_floor",
    "fit_exponent",
    "inv_phi",
    "log_star",
    "lower_moment_bound",
    "norm_moment",
    "sakhanenko_1d_bound",
    "sample_increments",
    "select_dimension",
    "simulate_U",
    "substream",
    "sweep",
    "trivial_rosenthal_bound",
    "whitened_moment_bound",
]
