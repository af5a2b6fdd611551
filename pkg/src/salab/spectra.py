"""Eigenvalue sequences of covariance operators and their certified tail sums.

A spectrum is a nonincreasing, summable sequence sigma_m^2 (m = 1, 2, ...) of
coordinate variances.  Four families are supported:

* ``exp``      -- sigma_m^2 = exp(-alpha * m**beta), alpha, beta > 0
* ``poly``     -- sigma_m^2 = m**(-b), b > 1
* ``log``      -- sigma_m^2 = 1 / (m * log_star(m)**(1 + tau)), tau > 0
* ``explicit`` -- a finite nonincreasing list of nonnegative values; all
                  coordinates beyond the list are exactly zero.

Tail traces sum_{m>d} (sigma_m^2)^p are computed exactly where a closed form
exists (geometric for ``exp`` with beta == 1, finite sums for ``explicit``)
and otherwise by direct summation plus an integral-comparison bracket for the
remainder: for a convex decreasing f,

    integral_{M+1}^inf f + f(M+1)/2  <=  sum_{m>M} f(m)  <=  integral_{M+1/2}^inf f

(trapezoid rule on the left, midpoint rule on the right).  The bracket
midpoint is returned together with its half-width; summation is extended
until the half-width is below ``TAIL_RTOL`` relative to the value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

__all__ = [
    "Spectrum",
    "SpectrumError",
    "TruncationCapError",
    "log_star",
]

# Relative accuracy target for certified tail brackets.  The public contract
# is 1e-10; we aim two orders tighter so downstream arithmetic keeps margin.
TAIL_RTOL = 1e-12
_TAIL_SUM_CAP = 1 << 26
_CHUNK = 1 << 20

_FAMILIES = ("exp", "poly", "log", "explicit")


class SpectrumError(ValueError):
    """Invalid spectrum parameters or an unsatisfiable accuracy request."""


class TruncationCapError(SpectrumError):
    """The truncation dimension would exceed the configured hard cap."""


def log_star(x: float) -> float:
    """max{1, ln x} for x > 0."""
    if x <= 0:
        raise ValueError(f"log_star requires a positive argument, got {x!r}")
    return max(1.0, math.log(x))


@dataclass(frozen=True)
class Spectrum:
    """Model of the eigenvalue sequence sigma_m^2 of a covariance operator."""

    kind: str
    params: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in _FAMILIES:
            raise SpectrumError(f"unknown spectrum family {self.kind!r}")
        if self.kind == "exp":
            alpha, beta = self._need_params(2)
            if alpha <= 0 or beta <= 0:
                raise SpectrumError("exp family needs alpha > 0 and beta > 0")
        elif self.kind == "poly":
            (b,) = self._need_params(1)
            if b <= 1:
                raise SpectrumError(
                    f"poly family needs b > 1 for a summable spectrum, got b={b}"
                )
        elif self.kind == "log":
            (tau,) = self._need_params(1)
            if tau <= 0:
                raise SpectrumError(
                    f"log family needs tau > 0 for a summable spectrum, got tau={tau}"
                )
        else:
            if self.params:
                raise SpectrumError("explicit spectra take no family parameters")
            vals = tuple(float(v) for v in self.values)
            for v in vals:
                if not math.isfinite(v) or v < 0:
                    raise SpectrumError(f"explicit eigenvalues must be finite and >= 0, got {v}")
            for lo, hi in zip(vals[1:], vals):
                if lo > hi:
                    raise SpectrumError("explicit eigenvalues must be nonincreasing")
            object.__setattr__(self, "values", vals)

    def _need_params(self, count: int) -> tuple[float, ...]:
        if len(self.params) != count:
            raise SpectrumError(
                f"{self.kind} family takes {count} parameter(s), got {len(self.params)}"
            )
        params = tuple(float(p) for p in self.params)
        if not all(math.isfinite(p) for p in params):
            raise SpectrumError("spectrum parameters must be finite")
        object.__setattr__(self, "params", params)
        return params

    # -- constructors -------------------------------------------------------

    @classmethod
    def exponential(cls, alpha: float, beta: float) -> "Spectrum":
        return cls("exp", (alpha, beta))

    @classmethod
    def polynomial(cls, b: float) -> "Spectrum":
        return cls("poly", (b,))

    @classmethod
    def logarithmic(cls, tau: float) -> "Spectrum":
        return cls("log", (tau,))

    @classmethod
    def explicit(cls, values) -> "Spectrum":
        return cls("explicit", (), tuple(values))

    @classmethod
    def parse(cls, text: str) -> "Spectrum":
        """Parse the compact CLI form: exp:a,b | poly:b | log:tau | explicit:v1,v2,..."""
        kind, sep, arg = text.partition(":")
        if not sep:
            raise SpectrumError(f"spectrum string {text!r} lacks ':' separator")
        try:
            parts = [float(p) for p in arg.split(",")] if arg else []
        except ValueError as exc:
            raise SpectrumError(f"cannot parse spectrum parameters in {text!r}") from exc
        if kind == "exp":
            if len(parts) != 2:
                raise SpectrumError("exp spectrum needs exactly alpha,beta")
            return cls.exponential(*parts)
        if kind == "poly":
            if len(parts) != 1:
                raise SpectrumError("poly spectrum needs exactly one parameter b")
            return cls.polynomial(parts[0])
        if kind == "log":
            if len(parts) != 1:
                raise SpectrumError("log spectrum needs exactly one parameter tau")
            return cls.logarithmic(parts[0])
        if kind == "explicit":
            return cls.explicit(parts)
        raise SpectrumError(f"unknown spectrum family {kind!r}")

    def spec_string(self) -> str:
        if self.kind == "explicit":
            return "explicit:" + ",".join(repr(v) for v in self.values)
        return self.kind + ":" + ",".join(repr(p) for p in self.params)

    # -- pointwise evaluation -----------------------------------------------

    @property
    def is_finite(self) -> bool:
        return self.kind == "explicit"

    def sigma_sq(self, m: int) -> float:
        """The m-th eigenvalue sigma_m^2 (exact closed-form evaluation)."""
        if m < 1:
            raise ValueError(f"coordinate index must be >= 1, got {m}")
        if self.kind == "exp":
            alpha, beta = self.params
            return math.exp(-alpha * m**beta)
        if self.kind == "poly":
            return float(m) ** -self.params[0]
        if self.kind == "log":
            tau = self.params[0]
            return 1.0 / (m * log_star(m) ** (1.0 + tau))
        return self.values[m - 1] if m <= len(self.values) else 0.0

    def log_sigma_sq(self, m: int) -> float:
        """ln sigma_m^2, evaluated without underflow (-inf for zero entries)."""
        if m < 1:
            raise ValueError(f"coordinate index must be >= 1, got {m}")
        if self.kind == "exp":
            alpha, beta = self.params
            return -alpha * m**beta
        if self.kind == "poly":
            return -self.params[0] * math.log(m)
        if self.kind == "log":
            tau = self.params[0]
            return -math.log(m) - (1.0 + tau) * math.log(log_star(m))
        v = self.values[m - 1] if m <= len(self.values) else 0.0
        return math.log(v) if v > 0 else -math.inf

    def sigma_sq_head(self, d: int) -> np.ndarray:
        """Array of sigma_m^2 for m = 1..d."""
        if d < 0:
            raise ValueError(f"head length must be >= 0, got {d}")
        m = np.arange(1, d + 1, dtype=np.float64)
        if self.kind == "exp":
            alpha, beta = self.params
            return np.exp(-alpha * m**beta)
        if self.kind == "poly":
            return m ** -self.params[0]
        if self.kind == "log":
            tau = self.params[0]
            return 1.0 / (m * np.maximum(1.0, np.log(m)) ** (1.0 + tau))
        out = np.zeros(d)
        ncopy = min(d, len(self.values))
        out[:ncopy] = self.values[:ncopy]
        return out

    # -- certified tail sums --------------------------------------------------

    def tail_variance(self, d: int) -> float:
        """B_d^2 = sum_{m>d} sigma_m^2 to relative accuracy <= 1e-10."""
        return self.tail_bracket(d)[0]

    def tail_bracket(self, d: int, power: int = 1) -> tuple[float, float]:
        """Certified bracket (midpoint, half_width) for sum_{m>d} (sigma_m^2)^power."""
        if d < 0:
            raise ValueError(f"tail start must be >= 0, got {d}")
        if power < 1:
            raise ValueError(f"power must be >= 1, got {power}")
        return _tail_bracket_cached(self, d, power)

    def total_variance(self) -> float:
        """B_0^2 = E ||Z||^2."""
        return self.tail_variance(0)

    def truncation_dim(self, rel_tol: float, hard_cap: int = 10**7) -> int:
        """Smallest D with B_D^2 / B_0^2 <= rel_tol (the list length for explicit)."""
        if not 0 < rel_tol < 1:
            raise ValueError(f"rel_tol must lie in (0, 1), got {rel_tol}")
        if self.kind == "explicit":
            return len(self.values)
        if self.kind == "exp" and self.params[1] == 1.0:
            # B_D^2 / B_0^2 == exp(-alpha * D) exactly; invert and fix up.
            alpha = self.params[0]
            dim = max(0, math.ceil(-math.log(rel_tol) / alpha) - 1)
            while math.exp(-alpha * (dim + 1)) > rel_tol:
                dim += 1
            dim = max(dim + 1, 1)
            if dim > hard_cap:
                raise TruncationCapError(
                    f"truncation dimension {dim} exceeds hard cap {hard_cap}; "
                    "the spectrum decays too slowly for the requested tolerance"
                )
            return dim
        budget = rel_tol * self.total_variance()
        if self.tail_variance(hard_cap) > budget:
            raise TruncationCapError(
                f"truncation dimension exceeds hard cap {hard_cap}; "
                "the spectrum decays too slowly for the requested tolerance"
            )
        lo, hi = 0, 1
        while self.tail_variance(hi) > budget:
            lo, hi = hi, min(2 * hi, hard_cap)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.tail_variance(mid) > budget:
                lo = mid
            else:
                hi = mid
        return hi

    # -- family internals -----------------------------------------------------

    def _tail_fn(self, power: int):
        """(f(ms array), integral_c^inf f, convexity threshold) for f = (sigma^2)^power."""
        if self.kind == "poly":
            pb = power * self.params[0]

            def f(ms):
                return ms**-pb

            def tail_int(c):
                return c ** (1.0 - pb) / (pb - 1.0)

            return f, tail_int, 1.0
        if self.kind == "log":
            tau = self.params[0]
            s = power * (1.0 + tau)

            def f(ms):
                return ms**-power * np.maximum(1.0, np.log(ms)) ** -s

            if power == 1:

                def tail_int(c):
                    return math.log(c) ** -tau / tau

            else:

                def tail_int(c):
                    val, err = integrate.quad(
                        lambda x: x**-power * math.log(x) ** -s,
                        c,
                        np.inf,
                        epsabs=0.0,
                        epsrel=1e-12,
                        limit=200,
                    )
                    return val

            return f, tail_int, math.e
        # exp family with beta != 1 (beta == 1 is handled by the closed form)
        alpha, beta = self.params
        pa = power * alpha

        def f(ms):
            return np.exp(-pa * ms**beta)

        inv_beta = 1.0 / beta
        norm = special.gamma(inv_beta) * pa**-inv_beta / beta

        def tail_int(c):
            return norm * special.gammaincc(inv_beta, pa * c**beta)

        convex_from = ((beta - 1.0) / (alpha * beta)) ** inv_beta if beta > 1 else 1.0
        return f, tail_int, convex_from


@lru_cache(maxsize=4096)
def _tail_bracket_cached(spectrum: Spectrum, d: int, power: int) -> tuple[float, float]:
    if spectrum.kind == "explicit":
        vals = spectrum.values[d:]
        return (math.fsum(v**power for v in vals), 0.0)
    if spectrum.kind == "exp" and spectrum.params[1] == 1.0:
        rate = power * spectrum.params[0]
        # geometric series: q^(d+1) / (1 - q) with q = exp(-rate)
        return (math.exp(-rate * (d + 1)) / -math.expm1(-rate), 0.0)

    f, tail_int, convex_from = spectrum._tail_fn(power)
    start = d + 1
    upto = max(start + 31, 64, math.ceil(convex_from) + 1)
    partial = _chunked_sum(f, start, upto)
    while True:
        f_next = float(f(np.array([upto + 1.0]))[0])
        lower = tail_int(upto + 1.0) + 0.5 * f_next
        upper = tail_int(upto + 0.5)
        mid = partial + 0.5 * (lower + upper)
        half = 0.5 * max(upper - lower, 0.0)
        if half <= TAIL_RTOL * mid or mid == 0.0:
            return (mid, half)
        if upto >= _TAIL_SUM_CAP:
            raise SpectrumError(
                f"certified tail summation did not reach relative accuracy "
                f"{TAIL_RTOL:g} within {_TAIL_SUM_CAP} terms "
                f"(family {spectrum.spec_string()!r}, d={d}, power={power})"
            )
        new_upto = min(upto * 4, _TAIL_SUM_CAP)
        partial += _chunked_sum(f, upto + 1, new_upto)
        upto = new_upto


def _chunked_sum(f, start: int, stop: int) -> float:
    """sum of f(m) for integer m in [start, stop], evaluated in vector chunks."""
    pieces = []
    m = start
    while m <= stop:
        hi = min(m + _CHUNK - 1, stop)
        pieces.append(float(np.sum(f(np.arange(m, hi + 1, dtype=np.float64)))))
        m = hi + 1
    return math.fsum(pieces)
