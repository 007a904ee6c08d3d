"""Exact SINR expressions, effective-throughput recomputation and the
full constraint re-check used to certify solver output."""

from __future__ import annotations

import math
from typing import List, Sequence

import numpy as np

from .. import fbl
from ..precoding import LinkCoefficients
from ..scenario import ScenarioConfig
from .types import AllocationProblem, AllocationSolution

__all__ = [
    "sinr_common",
    "sinr_private",
    "exact_caps",
    "exact_et",
    "recheck_constraints",
    "RATE_FLOOR",
    "RATE_CLEANUP",
]

# rates below this are treated as "stream off" (no data, vacuous decoding)
RATE_FLOOR = 1e-12
# extraction zeroes rates below this: solver noise, not a usable stream
RATE_CLEANUP = 1e-9


def sinr_common(
    links: LinkCoefficients, private_power: np.ndarray, common_power: float
) -> np.ndarray:
    """Per-user SINR when decoding the shared common stream."""
    p = np.asarray(private_power, dtype=float)
    if np.any(p < 0) or common_power < 0:
        raise ValueError("powers must be nonnegative")
    denom = links.a @ p + links.b * common_power + links.c
    return common_power * links.rho_common / denom


def sinr_private(
    links: LinkCoefficients, private_power: np.ndarray, common_power: float
) -> np.ndarray:
    """Per-user SINR for the private stream after (imperfect) SIC.

    The ``b * (p_k + p_c)`` term is the residual self- and common-stream
    interference left by the channel estimation error.
    """
    p = np.asarray(private_power, dtype=float)
    if np.any(p < 0) or common_power < 0:
        raise ValueError("powers must be nonnegative")
    cross = links.a @ p - links.a.diagonal() * p  # excludes k' = k
    denom = cross + links.b * (p + common_power) + links.c
    return p * links.rho_private.diagonal() / denom


def exact_caps(
    links: LinkCoefficients,
    private_power: np.ndarray,
    common_power: float,
    blocklength: float,
    error_threshold: float,
):
    """Exact per-user private rate caps and the group common-rate cap."""
    gamma_c = sinr_common(links, private_power, common_power)
    gamma_p = sinr_private(links, private_power, common_power)
    caps_p = np.array(
        [fbl.fbl_rate(float(g), blocklength, error_threshold) for g in gamma_p]
    )
    cap_c = min(
        fbl.fbl_rate(float(g), blocklength, error_threshold) for g in gamma_c
    )
    return float(cap_c), caps_p


def _stream_errors(
    links: LinkCoefficients,
    private_power: np.ndarray,
    common_power: float,
    common_rate: float,
    private_rates: np.ndarray,
    blocklength: float,
):
    """Exact decoding error probabilities; zero-rate streams are off."""
    gamma_c = sinr_common(links, private_power, common_power)
    gamma_p = sinr_private(links, private_power, common_power)
    size = links.group_size
    eps_c = np.zeros(size)
    eps_p = np.zeros(size)
    for k in range(size):
        if common_rate > RATE_FLOOR:
            eps_c[k] = fbl.decode_error(gamma_c[k], common_rate, blocklength)
        if private_rates[k] > RATE_FLOOR:
            eps_p[k] = fbl.decode_error(gamma_p[k], private_rates[k], blocklength)
    return gamma_c, gamma_p, eps_c, eps_p


def exact_et(
    solution: AllocationSolution,
    per_group_links: Sequence,
    config: ScenarioConfig,
) -> float:
    """Total effective throughput with exact error probabilities."""
    n_j = config.blocklength_per_subcarrier
    total = 0.0
    for j, links in enumerate(per_group_links):
        if links is None:
            continue
        _, _, eps_c, eps_p = _stream_errors(
            links,
            solution.private_power[j],
            float(solution.common_power[j]),
            float(solution.common_stream_rate[j]),
            solution.private_rates[j],
            n_j,
        )
        for k in range(links.group_size):
            et = fbl.effective_throughput(
                float(solution.common_rate_shares[j][k]),
                float(solution.private_rates[j][k]),
                float(eps_c[k]),
                float(eps_p[k]),
                config.error_threshold,
            )
            total += et.total
    return total


def recheck_constraints(
    solution: AllocationSolution, problem: AllocationProblem
) -> List[str]:
    """Verify a reported-feasible solution against the original constraint
    set with exact error probabilities.  Returns human-readable violations
    (empty list = pass).

    Tolerances: 1e-9 absolute on powers/rates, 1e-6 relative on the error
    threshold; streams carrying no rate are exempt from the reliability
    check (they transmit nothing).
    """
    cfg = problem.config
    n_j = cfg.blocklength_per_subcarrier
    tol = 1e-9
    out: List[str] = []
    if not solution.feasible:
        return ["solution is flagged infeasible"]

    budget_total = float(np.sum(solution.subcarrier_budgets))
    if budget_total > cfg.max_total_power_w + tol:
        out.append(
            f"total budget {budget_total!r} exceeds P_max {cfg.max_total_power_w!r}"
        )
    for j, members, links in problem.active_groups():
        p = solution.private_power[j]
        p_c = float(solution.common_power[j])
        r_c = float(solution.common_stream_rate[j])
        shares = solution.common_rate_shares[j]
        rates_p = solution.private_rates[j]
        if np.any(p < -1e-12) or p_c < -1e-12:
            out.append(f"group {j}: negative power")
        if np.any(shares < -1e-12) or np.any(rates_p < -1e-12) or r_c < -1e-12:
            out.append(f"group {j}: negative rate")
        used = float(np.sum(p)) + p_c
        if used > solution.subcarrier_budgets[j] + tol:
            out.append(
                f"group {j}: power {used!r} exceeds budget "
                f"{solution.subcarrier_budgets[j]!r}"
            )
        if float(np.sum(shares)) > r_c + tol:
            out.append(f"group {j}: common shares exceed the stream rate")
        gamma_c, gamma_p, eps_c, eps_p = _stream_errors(
            links, p, p_c, r_c, rates_p, n_j
        )
        if r_c > RATE_FLOOR:
            cap = min(
                fbl.fbl_rate(float(g), n_j, cfg.error_threshold) for g in gamma_c
            )
            if r_c > cap + tol:
                out.append(f"group {j}: common rate {r_c!r} above threshold {cap!r}")
        for k in range(len(members)):
            if rates_p[k] > RATE_FLOOR:
                cap = fbl.fbl_rate(float(gamma_p[k]), n_j, cfg.error_threshold)
                if rates_p[k] > cap + tol:
                    out.append(
                        f"group {j} user {members[k]}: private rate "
                        f"{rates_p[k]!r} above threshold {cap!r}"
                    )
            total_rate = float(shares[k]) + float(rates_p[k])
            if total_rate < cfg.min_rate_bps_hz - tol:
                out.append(
                    f"group {j} user {members[k]}: rate {total_rate!r} below minimum"
                )
            eps_lim = cfg.error_threshold * (1.0 + 1e-6)
            if eps_c[k] > eps_lim:
                out.append(
                    f"group {j} user {members[k]}: common error {eps_c[k]!r} "
                    f"exceeds threshold"
                )
            if eps_p[k] > eps_lim:
                out.append(
                    f"group {j} user {members[k]}: private error {eps_p[k]!r} "
                    f"exceeds threshold"
                )
    return out
