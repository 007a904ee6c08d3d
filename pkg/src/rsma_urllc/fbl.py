"""Finite-blocklength scalar machinery: Gaussian tail function and inverse,
channel dispersion, achievable rate, decoding error probability, effective
throughput, and the numeric validation of the throughput lower bound.

Conventions at the boundary gamma = 0 (where the dispersion vanishes and the
error formula divides by zero):

* ``decode_error(0, rate > 0)  = 1``  (no signal, guaranteed failure)
* ``decode_error(0, rate == 0) = 0``  (no stream, vacuously successful)

These saturations keep effective throughput continuous when a stream is
switched off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from scipy import special

__all__ = [
    "FblPoint",
    "EffectiveThroughput",
    "Lemma1Report",
    "q_function",
    "q_inverse",
    "dispersion",
    "fbl_rate",
    "decode_error",
    "effective_throughput",
    "validate_lemma1",
]

_SQRT2 = math.sqrt(2.0)
_LN2 = math.log(2.0)


def q_function(x):
    """Upper-tail probability of the standard normal distribution."""
    out = 0.5 * special.erfc(np.asarray(x, dtype=float) / _SQRT2)
    if np.ndim(x) == 0:
        return float(out)
    return out


def q_inverse(p: float) -> float:
    """Inverse of ``q_function`` by safeguarded Newton iteration.

    The closed-form seed is polished against ``q_function`` itself so the
    round trip ``q_function(q_inverse(p)) == p`` holds to 1e-12 relative even
    for p down to 1e-300.
    """
    if not (0.0 < p < 1.0):
        raise ValueError("q_inverse requires p in (0, 1)")
    if p == 0.5:
        return 0.0
    # seed from the erfc inverse, then bracket and polish on q_function
    x = _SQRT2 * special.erfcinv(2.0 * p)
    lo, hi = x - 1.0, x + 1.0
    # widen the bracket until it straddles the root (q is decreasing)
    while q_function(lo) < p:
        lo -= 1.0
    while q_function(hi) > p:
        hi += 1.0
    for _ in range(100):
        fx = q_function(x) - p
        if fx > 0:
            lo = max(lo, x)
        else:
            hi = min(hi, x)
        pdf = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        if pdf > 0.0:
            step = fx / pdf  # Newton: d/dx q(x) = -pdf(x)
            x_new = x + step
        else:
            x_new = 0.5 * (lo + hi)
        if not (lo <= x_new <= hi):
            x_new = 0.5 * (lo + hi)
        if abs(fx) <= 1e-14 * p or abs(x_new - x) <= 1e-15 * max(1.0, abs(x)):
            x = x_new
            break
        x = x_new
    return float(x)


def dispersion(gamma):
    """Channel dispersion V = 1 - (1 + gamma)^{-2} for gamma >= 0."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise ValueError("dispersion requires gamma >= 0")
    v = 1.0 - (1.0 + g) ** -2
    return float(v) if np.isscalar(gamma) or g.ndim == 0 else v


@dataclass(frozen=True)
class FblPoint:
    """A single operating point (SINR, blocklength, error target)."""

    sinr: float
    blocklength: float
    error_target: float

    def __post_init__(self):
        if not (self.sinr >= 0 and math.isfinite(self.sinr)):
            raise ValueError("sinr must be finite and >= 0")
        if self.blocklength <= 0:
            raise ValueError("blocklength must be positive")
        if not (0.0 < self.error_target < 0.5):
            raise ValueError("error_target must lie in (0, 0.5)")


def fbl_rate(point_or_gamma, blocklength=None, error_target=None) -> float:
    """Achievable rate with the dispersion penalty, in bits/s/Hz.

    May be negative at low SINR; callers clamp when building feasibility
    logic.  Accepts either an :class:`FblPoint` or the three scalars.
    """
    if isinstance(point_or_gamma, FblPoint):
        g, n, eps = (
            point_or_gamma.sinr,
            point_or_gamma.blocklength,
            point_or_gamma.error_target,
        )
    else:
        g, n, eps = point_or_gamma, blocklength, error_target
    v = dispersion(g)
    return math.log2(1.0 + g) - q_inverse(eps) / _LN2 * math.sqrt(v / n)


def decode_error(gamma: float, rate: float, blocklength: float) -> float:
    """Decoding error probability Q(f(gamma, rate)) at the given blocklength."""
    if rate < 0:
        raise ValueError("rate must be >= 0")
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    if gamma == 0.0:
        return 1.0 if rate > 0.0 else 0.0
    v = dispersion(gamma)
    f = _LN2 * math.sqrt(blocklength / v) * (math.log2(1.0 + gamma) - rate)
    return q_function(f)


@dataclass(frozen=True)
class EffectiveThroughput:
    """Exact and lower-bounded effective throughput of one user."""

    common_part: float
    private_part: float
    lower_bound_common: float
    lower_bound_private: float
    clamped: bool = False

    @property
    def total(self) -> float:
        return self.common_part + self.private_part

    @property
    def lower_bound_total(self) -> float:
        return self.lower_bound_common + self.lower_bound_private


def effective_throughput(
    common_rate: float,
    private_rate: float,
    eps_common: float,
    eps_private: float,
    error_threshold: float,
) -> EffectiveThroughput:
    """Effective throughput T = rate x success probability.

    The private part uses the first-order expansion
    ``R_p * (1 - eps_p - eps_c)``; when the combined error exceeds one the
    private part is clamped at zero and flagged (outside the URLLC regime).
    """
    if common_rate < 0 or private_rate < 0:
        raise ValueError("rates must be >= 0")
    for e in (eps_common, eps_private):
        if not (0.0 <= e <= 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
    t_c = common_rate * (1.0 - eps_common)
    success_p = 1.0 - eps_common - eps_private
    clamped = success_p < 0.0
    t_p = private_rate * max(0.0, success_p)
    return EffectiveThroughput(
        common_part=t_c,
        private_part=t_p,
        lower_bound_common=common_rate * (1.0 - error_threshold),
        lower_bound_private=private_rate * (1.0 - 2.0 * error_threshold),
        clamped=clamped,
    )


@dataclass
class Lemma1Report:
    """Grid validation of the throughput lower bound.

    For every (gamma, eps, N) grid point the report records whether
    T(R) = R(1 - Q(f(gamma, R))) is numerically increasing on [0, R_max],
    whether the bound R_max (1 - eps) lies below T(R_max), and the gap at
    the optimal point.
    """

    points: List[Tuple[float, float, float]] = field(default_factory=list)
    monotone: List[bool] = field(default_factory=list)
    bound_holds: List[bool] = field(default_factory=list)
    gaps: List[float] = field(default_factory=list)
    gap_limits: List[float] = field(default_factory=list)
    violations: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _throughput_curve(gamma: float, eps: float, n: float, rates: np.ndarray) -> np.ndarray:
    v = dispersion(gamma)
    f = _LN2 * math.sqrt(n / v) * (math.log2(1.0 + gamma) - rates)
    return rates * (1.0 - 0.5 * special.erfc(f / _SQRT2))


def validate_lemma1(
    gamma_grid: Iterable[float],
    eps_grid: Iterable[float],
    blocklength_grid: Iterable[float],
    rate_points: int = 64,
    fd_step: float = 1e-6,
) -> Lemma1Report:
    """Numerically validate the lower-bound lemma on a parameter grid.

    Preconditions (refused otherwise): eps <= 1e-4, N <= 1e4, gamma below
    60 dB.  At each grid point the check sweeps R over [0, R_max] with
    central finite differences of step ``fd_step``.
    """
    gamma_grid = list(gamma_grid)
    eps_grid = list(eps_grid)
    blocklength_grid = list(blocklength_grid)
    for eps in eps_grid:
        if eps > 1e-4:
            raise ValueError("lemma validation requires eps <= 1e-4")
    for n in blocklength_grid:
        if n > 1e4:
            raise ValueError("lemma validation requires blocklength <= 1e4")
    for g in gamma_grid:
        if g > 1e6:
            raise ValueError("lemma validation caps gamma at 60 dB")

    report = Lemma1Report()
    for g in gamma_grid:
        for eps in eps_grid:
            for n in blocklength_grid:
                r_max = fbl_rate(g, n, eps)
                report.points.append((g, eps, n))
                if r_max <= 0:
                    # no admissible rate; bound vacuous at R = 0
                    report.monotone.append(True)
                    report.bound_holds.append(True)
                    report.gaps.append(0.0)
                    report.gap_limits.append(0.0)
                    continue
                rates = np.linspace(0.0, r_max, rate_points)
                t_hi = _throughput_curve(g, eps, n, rates + fd_step)
                t_lo = _throughput_curve(g, eps, n, np.maximum(rates - fd_step, 0.0))
                slopes = (t_hi - t_lo) / (fd_step * 2.0)
                monotone = bool(np.all(slopes > 0.0))
                t_star = float(_throughput_curve(g, eps, n, np.array([r_max]))[0])
                bound = r_max * (1.0 - eps)
                gap = t_star - bound
                gap_limit = r_max * eps * 1e-6 + 1e-12
                report.monotone.append(monotone)
                report.bound_holds.append(gap >= -1e-12)
                report.gaps.append(gap)
                report.gap_limits.append(gap_limit)
                if not monotone:
                    report.violations.append(
                        f"throughput not increasing at gamma={g}, eps={eps}, N={n}"
                    )
                if gap < -1e-12:
                    report.violations.append(
                        f"lower bound above exact value at gamma={g}, eps={eps}, N={n}"
                    )
                if gap > gap_limit:
                    report.violations.append(
                        f"tightness gap {gap:.3e} exceeds {gap_limit:.3e} "
                        f"at gamma={g}, eps={eps}, N={n}"
                    )
    return report
