"""Command-line front end with deterministic, machine-readable output.

Single binary, subcommand style.  Flags can also be supplied through a JSON
config file (same keys as the flag names, underscores for dashes); explicit
flags override the file.  Every run echoes its fully resolved configuration
under the ``config`` key of the output document.

Exit codes: 0 success, 2 invalid input, 3 numerical diagnostics (overflow
flags in bound reports, truncation/scan caps exceeded).
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from fractions import Fraction
from typing import Optional

import numpy as np

from . import bounds, lowerbound, mc, simulate
from .spectra import Spectrum, SpectrumError, TruncationCapError

__all__ = ["main", "run"]

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICS = 3

_SEED_ENV = "SA_LAB_SEED"


class CliError(ValueError):
    """Invalid command-line input (exit code 2)."""


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not an exact rational: {text!r}") from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}") from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="salab",
        description="Coupling rates for Hilbert-valued partial sums: bounds, "
        "exact rate exponents, coupling simulation, and certified lower bounds.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file; flags override its entries")
        p.add_argument("--output", help="write the report to this path instead of stdout")
        p.add_argument("--threads", type=int, help="worker cap (results are identical)")

    p = sub.add_parser("bound", help="evaluate one upper bound for E(Delta_n)^gamma")
    add_common(p)
    p.add_argument("--theorem", choices=("3", "6", "9", "trivial"))
    p.add_argument("--spectrum")
    p.add_argument("--gamma", type=float)
    p.add_argument("--psi", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--moment", type=float, help="E||Z||^gamma")
    p.add_argument("--d", type=int, help="dimension; omitted = largest feasible")
    p.add_argument("--whitened-k", type=float, help="uniform whitened-moment constant K")
    p.add_argument("--tail-moment", type=float, help="E||Z^[d]||^gamma for the chosen d")
    p.add_argument("--c-gamma", type=float, help="entry-condition constant (default 1)")

    p = sub.add_parser("select-dim", help="pick the truncation dimension")
    add_common(p)
    p.add_argument("--spectrum")
    p.add_argument("--gamma", type=float)
    p.add_argument("--psi", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--moment", type=float)
    p.add_argument("--variant", choices=("thm4", "thm6", "thm9"))
    p.add_argument("--strategy", choices=("max-feasible", "example-formula"))
    p.add_argument("--example-id", type=int)
    p.add_argument("--whitened-k", type=float)
    p.add_argument("--c-gamma", type=float)
    p.add_argument("--scan-cap", type=int)

    p = sub.add_parser("rate", help="exact rate exponents for the worked examples")
    add_common(p)
    p.add_argument("--example", type=int, choices=(1, 2, 3, 4, 5))
    p.add_argument("--gamma", type=_fraction)
    p.add_argument("--psi", type=_fraction)
    p.add_argument("--alpha", type=_fraction)
    p.add_argument("--beta", type=_fraction)
    p.add_argument("--b", type=_fraction)
    p.add_argument("--tau", type=_fraction)
    p.add_argument("--compare", action="store_true", default=None,
                   help="include the lower-bound comparison (examples 1, 3, 5)")

    p = sub.add_parser("simulate", help="couple increments and estimate E(Delta_n)^gamma")
    add_common(p)
    p.add_argument("--spectrum")
    p.add_argument("--model", choices=simulate.MODEL_KINDS)
    p.add_argument("--n", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lambda", dest="lattice_step", type=float)
    p.add_argument("--dim", type=int, help="truncation dimension")
    p.add_argument("--rel-tol", type=float, help="pick dim by discarded-variance fraction")
    p.add_argument("--functional", choices=mc.FUNCTIONALS)
    p.add_argument("--dump-paths", help="CSV dump of the first replication path")

    p = sub.add_parser("lower-bound", help="lattice construction and probability floor")
    add_common(p)
    p.add_argument("--spectrum")
    p.add_argument("--lambda", dest="lattice_step", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--gamma", type=float, help="also report the moment lower bound")

    p = sub.add_parser("sweep", help="estimate over an n grid and fit the exponent")
    add_common(p)
    p.add_argument("--spectrum")
    p.add_argument("--model", choices=simulate.MODEL_KINDS)
    p.add_argument("--functional", choices=mc.FUNCTIONALS)
    p.add_argument("--gamma", type=float)
    p.add_argument("--n-grid", type=_int_list)
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lambda", dest="lattice_step", type=float)
    p.add_argument("--dim", type=int)
    p.add_argument("--rel-tol", type=float)
    p.add_argument("--format", choices=("json", "csv"))

    p = sub.add_parser("check", help="empirical maximal-sum and moment-bound checks")
    add_common(p)
    p.add_argument("--kind", choices=("montgomery-smith", "rosenthal"))
    p.add_argument("--spectrum")
    p.add_argument("--model", choices=("lattice3", "twopoint", "gaussian", "uniform"))
    p.add_argument("--n", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lambda", dest="lattice_step", type=float)
    p.add_argument("--dim", type=int)
    p.add_argument("--method", choices=("mc", "enumerate"))
    p.add_argument("--x-grid", type=_float_list, help="absolute thresholds for the maximal check")

    return parser


_DEFAULTS: dict[str, dict] = {
    "bound": {"psi": 11.0, "c_gamma": 1.0, "threads": 1},
    "select-dim": {
        "psi": 11.0,
        "c_gamma": 1.0,
        "variant": "thm9",
        "strategy": "max-feasible",
        "scan_cap": 10**6,
        "threads": 1,
    },
    "rate": {"psi": Fraction(11), "compare": False, "threads": 1},
    "simulate": {
        "psi": 11.0,
        "gamma": 2.0,
        "reps": 1000,
        "functional": "coupling-delta",
        "rel_tol": 1e-6,
        "threads": 1,
    },
    "lower-bound": {"reps": 10000, "threads": 1},
    "sweep": {"reps": 1000, "format": "json", "rel_tol": 1e-6, "threads": 1},
    "check": {
        "kind": "montgomery-smith",
        "gamma": 4.0,
        "reps": 10000,
        "method": "mc",
        "threads": 1,
    },
}


def _resolve_config(args: argparse.Namespace) -> dict:
    """Built-in defaults, then config-file entries, then explicit flags."""
    resolved = dict(_DEFAULTS.get(args.subcommand, {}))
    if getattr(args, "config", None):
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                file_conf = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config file {args.config!r}: {exc}") from exc
        if not isinstance(file_conf, dict):
            raise CliError("the config file must hold a JSON object")
        resolved.update(file_conf)
    for key, value in vars(args).items():
        if key in ("config", "subcommand") or value is None:
            continue
        resolved[key] = value
    if "seed" in resolved and resolved.get("seed") is None:
        resolved.pop("seed")
    if "seed" not in resolved and args.subcommand in ("simulate", "lower-bound", "sweep", "check"):
        resolved["seed"] = int(os.environ.get(_SEED_ENV, "0"))
    return resolved


def _require(conf: dict, *keys: str) -> None:
    missing = [k for k in keys if conf.get(k) is None]
    if missing:
        raise CliError(f"missing required option(s): {', '.join('--' + k.replace('_', '-') for k in missing)}")


def _spectrum(conf: dict) -> Spectrum:
    _require(conf, "spectrum")
    return Spectrum.parse(str(conf["spectrum"]))


def _instance(conf: dict, spectrum: Spectrum) -> bounds.ProblemInstance:
    _require(conf, "gamma", "n", "moment")
    return bounds.ProblemInstance(
        n=int(conf["n"]),
        gamma=float(conf["gamma"]),
        spectrum=spectrum,
        moment_z=float(conf["moment"]),
        psi=float(conf["psi"]),
        whitened_k=conf.get("whitened_k"),
        c_gamma=float(conf["c_gamma"]),
    )


def _build_model(conf: dict, spectrum: Spectrum) -> simulate.IncrementModel:
    _require(conf, "model")
    dim = conf.get("dim")
    if dim is None:
        dim = spectrum.truncation_dim(float(conf.get("rel_tol", 1e-6)))
    return simulate.IncrementModel(
        kind=str(conf["model"]),
        spectrum=spectrum,
        dim=int(dim),
        lattice_step=conf.get("lattice_step"),
    )


def _run_bound(conf: dict) -> tuple[dict, list[str]]:
    _require(conf, "theorem")
    spectrum = _spectrum(conf)
    inst = _instance(conf, spectrum)
    theorem = str(conf["theorem"])
    diagnostics: list[str] = []
    if theorem == "trivial":
        report = bounds.trivial_rosenthal_bound(inst)
    else:
        d = conf.get("d")
        if d is None:
            if theorem == "3":
                raise CliError("--theorem 3 needs an explicit --d (it has no entry condition)")
            variant = "thm6" if theorem == "6" else "thm9"
            d = bounds.select_dimension(inst, "max-feasible", variant=variant)
        d = int(d)
        if d == 0:
            report = bounds.trivial_rosenthal_bound(inst)
            diagnostics.append(
                "entry condition already fails at d=1; reporting the "
                "no-approximation fallback"
            )
        elif theorem == "3":
            report = bounds.bound_thm3(inst, d)
        elif theorem == "6":
            if conf.get("tail_moment") is not None:
                tm = float(conf["tail_moment"])
                inst = bounds.ProblemInstance(
                    n=inst.n, gamma=inst.gamma, spectrum=spectrum,
                    moment_z=inst.moment_z, psi=inst.psi,
                    whitened_k=inst.whitened_k, tail_moment=lambda _d: tm,
                    c_gamma=inst.c_gamma,
                )
            report = bounds.bound_thm6(inst, d)
        else:
            report = bounds.bound_thm9(inst, d)
    if report.has_overflow:
        diagnostics.append("bound terms exceed the overflow threshold; see log10 fields")
    result = report.to_dict()
    result["diagnostics"] = diagnostics
    return result, diagnostics


def _run_select_dim(conf: dict) -> tuple[dict, list[str]]:
    spectrum = _spectrum(conf)
    inst = _instance(conf, spectrum)
    d = bounds.select_dimension(
        inst,
        strategy=str(conf["strategy"]),
        variant=str(conf["variant"]),
        example_id=conf.get("example_id"),
        scan_cap=int(conf["scan_cap"]),
    )
    result: dict = {
        "d": d,
        "strategy": conf["strategy"],
        "variant": conf["variant"],
        "fallback": d == 0,
    }
    if d >= 1 and conf["strategy"] == "max-feasible":
        result["condition"] = bounds.check_condition(str(conf["variant"]), inst, d).to_dict()
    return result, []


def _run_rate(conf: dict) -> tuple[dict, list[str]]:
    _require(conf, "example", "gamma")
    kwargs = {
        "gamma": conf["gamma"],
        "psi": conf["psi"],
        "alpha": conf.get("alpha"),
        "beta": conf.get("beta"),
        "b": conf.get("b"),
        "tau": conf.get("tau"),
    }
    example = int(conf["example"])
    report = bounds.asymptotic_rate(example, **kwargs)
    result = report.to_dict()
    for key, value in result["auxiliary"].items():
        result[key] = value  # surface r, delta, rho, mu, epsilon at the top level
    if conf.get("compare"):
        if example not in (1, 3, 5):
            raise CliError("--compare covers examples 1, 3 and 5")
        result["comparison"] = bounds.compare_lower_upper(example, **kwargs).to_dict()
    return result, []


def _run_simulate(conf: dict) -> tuple[dict, list[str]]:
    _require(conf, "n", "reps")
    spectrum = _spectrum(conf)
    model = _build_model(conf, spectrum)
    scenario = mc.Scenario(model=model, n=int(conf["n"]), functional=str(conf["functional"]))
    estimate = mc.estimate_moment(
        scenario,
        gamma=float(conf["gamma"]),
        reps=int(conf["reps"]),
        master_seed=int(conf["seed"]),
        threads=int(conf["threads"]),
    )
    discarded = spectrum.tail_variance(model.dim)
    total = spectrum.total_variance()
    result = {
        "estimate": estimate.to_dict(),
        "model": model.label(),
        "trunc_dim": model.dim,
        "discarded_variance": discarded,
        "discarded_fraction": discarded / total if total > 0 else 0.0,
    }
    if conf.get("dump_paths"):
        rng = mc.substream(int(conf["seed"]), 0)
        paths = simulate.couple_quantile(model, int(conf["n"]), rng)
        with open(conf["dump_paths"], "w", encoding="utf-8", newline="") as fh:
            simulate.dump_paths(paths, fh, seed=int(conf["seed"]))
        result["paths_csv"] = conf["dump_paths"]
    return result, []


def _run_lower_bound(conf: dict) -> tuple[dict, list[str]]:
    _require(conf, "lattice_step", "n", "reps")
    spectrum = _spectrum(conf)
    instance = lowerbound.build_lattice_instance(
        spectrum,
        lattice_step=float(conf["lattice_step"]),
        n=int(conf["n"]),
        trunc_dim=conf.get("dim"),
    )
    summary = lowerbound.simulate_U(
        instance,
        reps=int(conf["reps"]),
        master_seed=int(conf["seed"]),
        threads=int(conf["threads"]),
    )
    result = {
        "lambda": instance.lattice_step,
        "k": instance.k,
        "a": instance.a,
        "b": instance.b,
        "feller_floor": instance.feller_floor,
        "empirical_prob": summary.prob_half_a,
        "certified_quantiles": summary.to_dict()["certified_quantiles"],
        "truncation_deficit": instance.truncation_deficit,
        "instance": instance.to_dict(),
        "summary": summary.to_dict(),
    }
    if conf.get("gamma") is not None:
        result["moment_lower_bound"] = lowerbound.lower_moment_bound(
            instance, float(conf["gamma"])
        ).to_dict()
    return result, []


def _run_sweep(conf: dict) -> tuple[dict, list[str]]:
    _require(conf, "n_grid", "gamma", "functional")
    spectrum = _spectrum(conf)
    model = _build_model(conf, spectrum)
    grid = [int(n) for n in conf["n_grid"]]
    template = mc.Scenario(model=model, n=max(grid), functional=str(conf["functional"]))
    result_obj = mc.sweep(
        template,
        grid,
        gamma=float(conf["gamma"]),
        reps=int(conf["reps"]),
        master_seed=int(conf["seed"]),
        threads=int(conf["threads"]),
    )
    return {"sweep": result_obj.to_dict(), "model": model.label(), "_sweep_obj": result_obj}, []


def _run_check(conf: dict) -> tuple[dict, list[str]]:
    _require(conf, "n")
    spectrum = _spectrum(conf)
    model = _build_model(conf, spectrum)
    n = int(conf["n"])
    method = str(conf["method"])
    rng = mc.substream(int(conf["seed"]), 0) if method == "mc" else None
    if conf["kind"] == "montgomery-smith":
        x_grid = conf.get("x_grid")
        if x_grid is None:
            scale = math.sqrt(n * float(np.sum(model.variances)))
            x_grid = [m * 0.5 * scale for m in range(1, 11)]
        margins = simulate.empirical_check_montgomery_smith(
            model, n, x_grid, reps=int(conf["reps"]), rng=rng, method=method
        )
        worst = max(m.margin - 4.0 * m.stderr for m in margins)
        result = {
            "kind": "montgomery-smith",
            "margins": [m.to_dict() for m in margins],
            "worst_adjusted_margin": worst,
            "holds": worst <= 0.0,
        }
    elif conf["kind"] == "rosenthal":
        check = simulate.empirical_check_rosenthal(
            model, n, gamma=float(conf["gamma"]), reps=int(conf["reps"]), rng=rng, method=method
        )
        result = {"kind": "rosenthal", **check.to_dict()}
    else:
        raise CliError(f"unknown check kind {conf['kind']!r}")
    return result, []


_RUNNERS = {
    "bound": _run_bound,
    "select-dim": _run_select_dim,
    "rate": _run_rate,
    "simulate": _run_simulate,
    "lower-bound": _run_lower_bound,
    "sweep": _run_sweep,
    "check": _run_check,
}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and math.isinf(obj):
        return "overflow"
    return obj


def run(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        conf = _resolve_config(args)
        result, diagnostics = _RUNNERS[args.subcommand](conf)
    except (TruncationCapError, bounds.ScanCapError, ArithmeticError) as exc:
        print(f"salab: numerical diagnostic: {exc}", file=sys.stderr)
        return EXIT_NUMERICS
    except (CliError, SpectrumError, bounds.MissingMomentError, ValueError) as exc:
        print(f"salab: error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    sweep_obj = result.pop("_sweep_obj", None)
    document = {
        "subcommand": args.subcommand,
        "config": _jsonable({k: v for k, v in conf.items() if not k.startswith("_")}),
        "result": _jsonable(result),
    }

    out_path = conf.get("output")
    if args.subcommand == "sweep" and conf.get("format") == "csv" and sweep_obj is not None:
        buf = io.StringIO()
        sweep_obj.to_csv(buf)
        payload = buf.getvalue()
    else:
        payload = json.dumps(document, indent=2, sort_keys=True) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload)
    return EXIT_NUMERICS if diagnostics else EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
