"""Iteration-free lower-bound approximation (LBA) solver and the max-min
feasibility check, both single conic solves.

The LBA surrogate replaces the dispersion penalty by its worst case
(sqrt(V) -> 1) and linearizes the interference log term around the
zero-forcing operating point, which keeps every constraint an inner
approximation: any solution it returns satisfies the exact rate and
reliability constraints.

All conic data is pre-scaled: powers in milliwatts, channel gains divided
by the largest rho of the instance (SINRs are invariant under the shared
gain scaling).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..conic import Affine, ConicProgram
from ..scenario import derive_theta
from .sinr import RATE_CLEANUP, exact_caps, exact_et
from .types import AllocationProblem, AllocationSolution

__all__ = ["lba_solve", "feasibility_check", "CONIC_TOL"]

_LN2 = math.log(2.0)
CONIC_TOL = 1e-9
W_TO_MW = 1e3
# tightening of the modeled rate caps absorbing solver residuals
_RATE_SAFETY = 1e-7
# tiny reward that pins every log-hypograph slack to its curve; without it
# slack rate caps leave the exponential blocks dual-degenerate and the
# homogeneous embedding can drift off along a tau -> 0 ray
_LOG_PIN = 1e-7


@dataclass
class ScaledLinks:
    """Link coefficients in solver units (gains / g_scale, powers in mW)."""

    rho_c: np.ndarray
    rho_p: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: float


def scale_problem(problem: AllocationProblem) -> Tuple[List[Optional[ScaledLinks]], float]:
    """Normalize gains by the largest rho across the instance."""
    g_scale = 0.0
    for _, _, links in problem.active_groups():
        g_scale = max(g_scale, float(links.rho_private.max()), float(links.rho_common.max()))
    if g_scale <= 0.0:
        g_scale = 1.0
    scaled: List[Optional[ScaledLinks]] = []
    for links in problem.per_group_links:
        if links is None:
            scaled.append(None)
            continue
        scaled.append(
            ScaledLinks(
                rho_c=links.rho_common / g_scale,
                rho_p=links.rho_private / g_scale,
                a=links.a / g_scale,
                b=links.b / g_scale,
                c=links.c * W_TO_MW / g_scale,
            )
        )
    return scaled, g_scale


def _build_lba(problem: AllocationProblem, feasibility: bool):
    """Shared constraint set of the LBA objective problem and the max-min
    feasibility problem (which drops the minimum-rate rows and maximizes a
    shared rate floor instead)."""
    cfg = problem.config
    theta = derive_theta(cfg)
    rsma = problem.mode == "rsma"
    scaled, _ = scale_problem(problem)
    budget_mw = cfg.max_total_power_w * W_TO_MW / cfg.num_subcarriers

    prog = ConicProgram()
    handles: Dict = {"p": {}, "pc": {}, "rc": {}, "shares": {}, "rp": {}, "rhat": {}}
    objective = Affine()
    pin = Affine()
    r_floor = prog.add_variable("r") if feasibility else None
    if feasibility:
        prog.add_nonneg(r_floor)

    for j, members, _ in problem.active_groups():
        links = scaled[j]
        size = len(members)
        p = prog.add_variables(size, prefix=f"p{j}_")
        for v in p:
            prog.add_nonneg(v)
        pc = None
        rc = None
        shares: List[Affine] = []
        if rsma:
            pc = prog.add_variable(f"pc{j}")
            prog.add_nonneg(pc)
            rc = prog.add_variable(f"rc{j}")
            prog.add_nonneg(rc)
            shares = prog.add_variables(size, prefix=f"rkc{j}_")
            for v in shares:
                prog.add_nonneg(v)
        rp = prog.add_variables(size, prefix=f"rp{j}_")
        rhat = prog.add_variables(size, prefix=f"rhat{j}_")
        for v in rp:
            prog.add_nonneg(v)
        for v in rhat:
            prog.add_nonneg(v)

        z = links.b * budget_mw + links.c  # per-user interference floor
        for k in range(size):
            # chi2 linearization of the interference log term
            chi2 = Affine(const=math.log2(z[k]))
            for kp in range(size):
                if kp != k:
                    chi2 = chi2 + (links.rho_p[k, kp] / (z[k] * _LN2)) * p[kp]
            aff1 = Affine(const=z[k])
            for kp in range(size):
                aff1 = aff1 + links.rho_p[k, kp] * p[kp]
            u1 = prog.add_variable(f"u1_{j}_{k}")
            prog.add_log_lower_bound(u1, aff1)
            pin = pin + _LOG_PIN * u1
            # private-rate cap
            prog.add_le(rhat[k], u1 * (1.0 / _LN2) - chi2 - theta - _RATE_SAFETY)
            prog.add_le(rp[k], rhat[k])
            if rsma:
                aff2 = aff1 + links.rho_c[k] * pc
                u2 = prog.add_variable(f"u2_{j}_{k}")
                prog.add_log_lower_bound(u2, aff2)
                pin = pin + _LOG_PIN * u2
                # common-rate cap; the private slack reappears with a
                # second blocklength penalty
                prog.add_le(
                    rc,
                    u2 * (1.0 / _LN2) - rhat[k] - chi2 - 2.0 * theta - _RATE_SAFETY,
                )
                # companion cap that stays valid when the private slack sits
                # below its bound: the interference log is over-estimated by
                # its tangent at the equal-power point, which keeps the bound
                # an inner approximation of the exact one at any allocation
                p_ref = budget_mw / (size + 1)
                a_ref = z[k] + float(links.rho_p[k].sum()) * p_ref
                tangent = Affine(const=math.log2(a_ref) - links.rho_p[k].sum() * p_ref / (a_ref * _LN2))
                for kp in range(size):
                    tangent = tangent + (links.rho_p[k, kp] / (a_ref * _LN2)) * p[kp]
                prog.add_le(
                    rc, u2 * (1.0 / _LN2) - tangent - theta - _RATE_SAFETY
                )

        power_sum = sum(p, Affine())
        if rsma:
            power_sum = power_sum + pc
            prog.add_le(sum(shares, Affine()), rc)
        prog.add_le(power_sum, budget_mw)

        for k in range(size):
            total = rp[k] + (shares[k] if rsma else 0.0)
            if feasibility:
                prog.add_le(r_floor, total)
            else:
                prog.add_nonneg(total - cfg.min_rate_bps_hz)
            objective = objective + (1.0 - 2.0 * cfg.error_threshold) * rp[k]
            if rsma:
                objective = objective + (1.0 - cfg.error_threshold) * shares[k]

        handles["p"][j] = p
        handles["pc"][j] = pc
        handles["rc"][j] = rc
        handles["shares"][j] = shares
        handles["rp"][j] = rp
        handles["rhat"][j] = rhat

    prog.maximize((r_floor if feasibility else objective) + pin)
    return prog, handles, budget_mw


def _extract(
    problem: AllocationProblem,
    sol,
    handles,
    budget_mw: float,
    enforce_exact: bool = True,
) -> AllocationSolution:
    """Read a solution back in watts/bits and restore exact feasibility.

    The private-cap slack of the surrogate can sit below its bound at
    degenerate optima, which lets the modeled common-rate cap exceed the
    exact finite-blocklength one.  The extracted common rate is therefore
    clamped to the exact cap at the extracted powers and the shares are
    re-split to cover each user's minimum-rate deficit; when they no longer
    can, the run is reported infeasible.  Private rates are always exactly
    safe and are only cleaned of solver noise.
    """
    cfg = problem.config
    n_j = cfg.blocklength_per_subcarrier
    j_total = problem.num_groups
    sizes = problem.groups.sizes
    out = AllocationSolution.empty(j_total, sizes, status=sol.status)
    out.feasible = True
    out.status = sol.status
    out.iterations = sol.iterations
    out.subcarrier_budgets = np.full(j_total, budget_mw / W_TO_MW)
    lower_bound = 0.0
    for j, members, links in problem.active_groups():
        p = np.array([max(0.0, sol.value(v)) for v in handles["p"][j]])
        p_w = p / W_TO_MW
        out.private_power[j] = p_w
        rates_p = np.array([max(0.0, sol.value(v)) for v in handles["rp"][j]])
        rates_p[rates_p < RATE_CLEANUP] = 0.0
        r_c = 0.0
        shares = np.zeros(len(members))
        pc_w = 0.0
        if handles["pc"][j] is not None:
            pc_w = max(0.0, sol.value(handles["pc"][j])) / W_TO_MW
            r_c = max(0.0, sol.value(handles["rc"][j]))
            shares = np.array(
                [max(0.0, sol.value(v)) for v in handles["shares"][j]]
            )
        # scale solver power residue back inside the budget before the caps
        # are evaluated, so looser retry solves still extract safely
        budget_w = budget_mw / W_TO_MW
        used = float(p_w.sum()) + pc_w
        if used > budget_w:
            factor = budget_w / used
            p_w = p_w * factor
            pc_w *= factor
            out.private_power[j] = p_w
        out.common_power[j] = pc_w
        if enforce_exact:
            cap_c, caps_p = exact_caps(
                links, p_w, pc_w, n_j, cfg.error_threshold
            )
            rates_p = np.minimum(rates_p, np.maximum(caps_p, 0.0))
            cap_c = max(0.0, cap_c)
            if r_c > cap_c + 1e-12:
                r_c = cap_c
                need = np.maximum(0.0, cfg.min_rate_bps_hz - rates_p)
                if need.sum() > r_c + 1e-9:
                    return AllocationSolution.empty(
                        j_total, sizes, status="infeasible"
                    )
                shares = need
                shares[0] += r_c - need.sum()
        if r_c < RATE_CLEANUP:
            r_c = 0.0
            shares = np.zeros(len(members))
        total_shares = shares.sum()
        if total_shares > r_c > 0.0:
            shares *= r_c / total_shares
        out.common_stream_rate[j] = r_c
        out.common_rate_shares[j] = shares
        out.private_rates[j] = rates_p
        lower_bound += float(
            (1.0 - cfg.error_threshold) * shares.sum()
            + (1.0 - 2.0 * cfg.error_threshold) * rates_p.sum()
        )
    out.sum_et_lower_bound = lower_bound
    out.sum_et_exact = exact_et(out, problem.per_group_links, cfg)
    return out


def _lba_single(problem: AllocationProblem, conic_tol: float) -> AllocationSolution:
    sizes = problem.groups.sizes
    prog, handles, budget_mw = _build_lba(problem, feasibility=False)
    sol = _solve_with_retry(prog, conic_tol)
    if sol.status == "infeasible":
        return AllocationSolution.empty(problem.num_groups, sizes, status="infeasible")
    if sol.status != "optimal":
        return AllocationSolution.empty(problem.num_groups, sizes, status=sol.status)
    out = _extract(problem, sol, handles, budget_mw)
    out.solver_trace = [out.sum_et_lower_bound]
    return out


def lba_solve(problem: AllocationProblem, conic_tol: float = CONIC_TOL) -> AllocationSolution:
    """Iteration-free convex allocation via the lower-bound surrogate.

    Requires the equal power split across subcarriers the surrogate is
    built on.  The surrogate couples the private-rate slack to the common
    chain, which makes it pour power into a common stream it then leaves
    at rate zero; a second solve with the common machinery removed (a
    valid operating mode of the same problem) repairs that, and the better
    of the two lower bounds is returned.  An infeasible program maps to
    the zero-throughput convention.
    """
    if problem.power_budget_mode != "equal_split":
        raise ValueError("lba_solve assumes power_budget_mode='equal_split'")
    if problem.config.error_threshold > 1e-4:
        raise ValueError("lower-bound surrogate requires error_threshold <= 1e-4")
    sizes = problem.groups.sizes
    if not any(sizes):
        return AllocationSolution.empty(problem.num_groups, sizes, status="optimal")
    out = _lba_single(problem, conic_tol)
    if problem.mode == "rsma":
        common_free = _lba_single(
            dataclasses.replace(problem, mode="sdma"), conic_tol
        )
        if common_free.feasible and (
            not out.feasible
            or common_free.sum_et_lower_bound > out.sum_et_lower_bound + 1e-12
        ):
            out = common_free
            out.sum_et_exact = exact_et(out, problem.per_group_links,
                                        problem.config)
    return out


def _solve_with_retry(prog: ConicProgram, conic_tol: float):
    """Solve, then retry once at a loosened tolerance.

    Degenerate instances can strand the homogeneous embedding on its
    tau = kappa = 0 face before reaching a tight tolerance; the extraction
    repair (exact-cap clamps, budget rescale) keeps loose solutions safe.
    """
    sol = prog.solve(tol=conic_tol)
    if sol.status in ("optimal", "infeasible", "unbounded") or conic_tol >= 1e-6:
        return sol
    return prog.solve(tol=1e-6)


def feasibility_check(
    problem: AllocationProblem, conic_tol: float = CONIC_TOL
) -> Tuple[float, AllocationSolution]:
    """Maximize the worst per-user total rate under the LBA constraint set.

    The problem is feasible iff the returned r* reaches the configured
    minimum rate; the maximizing allocation doubles as the CCCP starting
    point.
    """
    if problem.config.error_threshold > 1e-4:
        raise ValueError("lower-bound surrogate requires error_threshold <= 1e-4")
    sizes = problem.groups.sizes
    if not any(sizes):
        return 0.0, AllocationSolution.empty(problem.num_groups, sizes, status="optimal")
    prog, handles, budget_mw = _build_lba(problem, feasibility=True)
    sol = _solve_with_retry(prog, conic_tol)
    if sol.status != "optimal":
        return -math.inf, AllocationSolution.empty(
            problem.num_groups, sizes, status=sol.status
        )
    out = _extract(problem, sol, handles, budget_mw)
    return float(sol.objective_value), out
