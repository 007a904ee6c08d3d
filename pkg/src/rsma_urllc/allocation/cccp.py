"""Iterative concave-convex (DC) solver for the joint rate-control and
power-allocation problem.

Each iteration solves one convex conic subproblem built from three
linearizations around the previous point: tangents of the concave
dispersion term sqrt(V), and the difference-of-squares split of the
bilinear SINR constraints with the concave squares linearized.  All
three touch at the linearization point, so the previous iterate stays
feasible and the objective trace is nondecreasing.

Stream structure (which users carry a private stream, which groups carry
a common stream) is frozen at the starting point: tangents of sqrt(V)
do not exist at zero SINR, so streams that start switched off stay off.
The starting point comes from the max-min feasibility problem; when it
leaves the common stream unpowered, a small power bump is attempted so
the common stream can participate, and is kept only if every user still
clears the minimum-rate requirement at the bumped point.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .. import fbl
from ..conic import Affine, ConicProgram
from ..scenario import derive_theta
from .lba import (
    CONIC_TOL,
    W_TO_MW,
    _LOG_PIN,
    feasibility_check,
    lba_solve,
    scale_problem,
)
from .sinr import RATE_CLEANUP, exact_et, sinr_common, sinr_private
from .types import AllocationProblem, AllocationSolution, CccpState

__all__ = ["cccp_solve", "CccpOptions"]

_LN2 = math.log(2.0)
_POWER_FLOOR_W = 1e-15     # below this a stream counts as unpowered
_SINR_FLOOR = 1e-9
# power-scale floor (fraction of the subcarrier budget) for the balanced
# difference-of-squares split
_SPLIT_FLOOR = 0.3
# rate caps are tightened by this to absorb solver residuals, so returned
# rates stay inside the exact finite-blocklength caps
_RATE_SAFETY = 1e-7
# iteration cap of the secondary (common-stream-on) candidate run
_COMMON_RUN_ITERS = 15


@dataclass
class CccpOptions:
    tol: float = 1e-4
    max_iters: int = 50
    conic_tol: float = CONIC_TOL


@dataclass
class _Structure:
    """Which streams participate, frozen across iterations."""

    common_on: Dict[int, bool]
    private_on: Dict[int, np.ndarray]


def _phi(x: float) -> float:
    return math.sqrt(1.0 - (1.0 + x) ** -2)


def _phi_tangent(var: Affine, x0: float) -> Affine:
    """Affine over-estimator of the concave sqrt(V) at x0 > 0."""
    p0 = _phi(x0)
    slope = 1.0 / (p0 * (1.0 + x0) ** 3)
    return Affine(const=p0 - slope * x0) + slope * var


def _square_lin(x: Affine, y: Affine, x0: float, y0: float) -> Affine:
    """Affine under-estimator of (x - y)^2 around (x0, y0)."""
    d0 = x0 - y0
    return Affine(const=-d0 * d0) + (2.0 * d0) * (x - y)


def _bilinear_pair(x: Affine, y: Affine, x0: float, y0: float, coef: float,
                   x_floor: float = 0.0):
    """One difference-of-squares over-estimator of ``coef * x * y``.

    The split is applied to variables normalized by their current values
    (the power scale floored at a fraction of the budget so power moves are
    not over-penalized near zero), which balances the retained convex
    square against the linearized concave one; the estimator still touches
    at (x0, y0) and dominates the bilinear term everywhere on the
    nonnegative orthant.

    Returns the (coefficient, expression) quadratic term for the convex
    side and the affine remainder to move to the right-hand side.
    """
    sx = max(x0, x_floor, 1e-6)
    sy = max(y0, 1e-6)
    c2 = coef * sx * sy / 4.0
    xn = x * (1.0 / sx)
    yn = y * (1.0 / sy)
    quad = (c2, xn + yn)
    rhs_part = c2 * _square_lin(xn, yn, x0 / sx, y0 / sy)
    return quad, rhs_part


def _rate_cap(gamma: float, n_j: int, eps: float) -> float:
    return fbl.fbl_rate(float(gamma), n_j, eps)


def _analyze_candidate(
    problem: AllocationProblem,
    private_w: List[np.ndarray],
    common_w: np.ndarray,
) -> Optional[Tuple[_Structure, CccpState]]:
    """Derive the stream structure at a candidate point and verify the
    minimum-rate requirement can be met there; None when it cannot."""
    cfg = problem.config
    n_j = cfg.blocklength_per_subcarrier
    eps = cfg.error_threshold
    rsma = problem.mode == "rsma"
    common_on: Dict[int, bool] = {}
    private_on: Dict[int, np.ndarray] = {}
    lam: List[np.ndarray] = [np.zeros(0)] * problem.num_groups
    mu: List[np.ndarray] = [np.zeros(0)] * problem.num_groups

    for j, members, links in problem.active_groups():
        p = private_w[j]
        pc = float(common_w[j])
        gamma_c = sinr_common(links, p, pc)
        caps_c = np.array([_rate_cap(g, n_j, eps) for g in gamma_c])
        on_c = bool(rsma and pc > _POWER_FLOOR_W and caps_c.min() >= 0.0)
        if not on_c:
            # residual common power only adds interference once the stream
            # is structurally off
            pc = 0.0
            common_w[j] = 0.0
            gamma_c = sinr_common(links, p, pc)
        gamma_p = sinr_private(links, p, pc)
        caps_p = np.array([_rate_cap(g, n_j, eps) for g in gamma_p])
        on_p = (p > _POWER_FLOOR_W) & (caps_p >= 0.0)
        cap_c = max(0.0, caps_c.min()) if on_c else 0.0
        need = 0.0
        for k in range(len(members)):
            covered = caps_p[k] if on_p[k] else 0.0
            need += max(0.0, cfg.min_rate_bps_hz - covered)
        if need > cap_c + 1e-12:
            return None
        common_on[j] = on_c
        private_on[j] = on_p
        lam[j] = np.maximum(gamma_c, _SINR_FLOOR)
        mu[j] = np.maximum(gamma_p, _SINR_FLOOR)

    state = CccpState(
        iteration=0,
        lam=lam,
        mu=mu,
        private_power=[np.array(p, dtype=float) for p in private_w],
        common_power=np.array(common_w, dtype=float),
    )
    return _Structure(common_on=common_on, private_on=private_on), state


def _starting_candidates(
    problem: AllocationProblem, init: Optional[AllocationSolution]
) -> List[Tuple[_Structure, CccpState]]:
    """Build the starting points: the feasibility solution with its common
    stream folded into the private powers (the SDMA-shaped run every RSMA
    solve falls back on), plus the feasibility point as-is when it powers a
    viable common stream."""
    cfg = problem.config
    if init is None:
        r_star, init = feasibility_check(problem, conic_tol=1e-7)
        if math.isfinite(r_star) and r_star < cfg.min_rate_bps_hz - 1e-9:
            return []
        if not math.isfinite(r_star):
            # the max-min program has a degenerate optimal face some
            # interior-point runs cannot resolve; a successful full solve
            # certifies feasibility just as well and its point is a valid
            # start
            fallback_problem = problem
            if problem.power_budget_mode != "equal_split":
                fallback_problem = dataclasses.replace(
                    problem, power_budget_mode="equal_split"
                )
            init = lba_solve(fallback_problem)
            if not init.feasible:
                return []
    raw_p = [np.array(p, dtype=float) for p in init.private_power]
    raw_pc = np.array(init.common_power, dtype=float)

    candidates = []
    off_p = [p.copy() for p in raw_p]
    for j, _, _ in problem.active_groups():
        total = off_p[j].sum()
        if raw_pc[j] > 0.0 and total > 0.0:
            off_p[j] *= (total + raw_pc[j]) / total
    analyzed = _analyze_candidate(problem, off_p, np.zeros_like(raw_pc))
    if analyzed is not None:
        candidates.append(analyzed)
    if problem.mode == "rsma" and any(
        raw_pc[j] > _POWER_FLOOR_W for j, _, _ in problem.active_groups()
    ):
        analyzed = _analyze_candidate(problem, raw_p, raw_pc)
        if analyzed is not None and any(analyzed[0].common_on.values()):
            candidates.append(analyzed)
    return candidates


def _build_subproblem(
    problem: AllocationProblem, state: CccpState, structure: _Structure
):
    cfg = problem.config
    theta = derive_theta(cfg)
    eps = cfg.error_threshold
    scaled, _ = scale_problem(problem)
    joint = problem.power_budget_mode == "joint"
    budget_mw = cfg.max_total_power_w * W_TO_MW / cfg.num_subcarriers

    split_floor = _SPLIT_FLOOR * budget_mw
    prog = ConicProgram()
    handles: Dict = {"p": {}, "pc": {}, "rc": {}, "shares": {}, "rp": {},
                     "lam": {}, "mu": {}, "budget": {}}
    objective = Affine()
    pin = Affine()
    budget_vars = []

    for j, members, _ in problem.active_groups():
        links = scaled[j]
        size = len(members)
        on_c = structure.common_on[j]
        on_p = structure.private_on[j]
        lam0 = state.lam[j]
        mu0 = state.mu[j]
        p0 = state.private_power[j] * W_TO_MW
        pc0 = float(state.common_power[j]) * W_TO_MW

        p = prog.add_variables(size, prefix=f"p{j}_")
        for v in p:
            prog.add_nonneg(v)
        pc = rc = None
        shares: List[Affine] = []
        lam_v: List[Affine] = []
        if on_c:
            pc = prog.add_variable(f"pc{j}")
            rc = prog.add_variable(f"rc{j}")
            prog.add_nonneg(pc)
            prog.add_nonneg(rc)
            shares = prog.add_variables(size, prefix=f"rkc{j}_")
            lam_v = prog.add_variables(size, prefix=f"lam{j}_")
            for v in shares:
                prog.add_nonneg(v)
            for v in lam_v:
                prog.add_nonneg(v)
        rp: List[Optional[Affine]] = [None] * size
        mu_v: List[Optional[Affine]] = [None] * size
        for k in range(size):
            if on_p[k]:
                rp[k] = prog.add_variable(f"rp{j}_{k}")
                mu_v[k] = prog.add_variable(f"mu{j}_{k}")
                prog.add_nonneg(rp[k])
                prog.add_nonneg(mu_v[k])

        for k in range(size):
            if on_c:
                # common-rate cap through the slack SINR lambda_k
                u = prog.add_variable(f"u{j}_{k}")
                prog.add_log_lower_bound(u, Affine(const=1.0) + lam_v[k])
                pin = pin + _LOG_PIN * u
                prog.add_le(
                    rc,
                    u * (1.0 / _LN2)
                    - theta * _phi_tangent(lam_v[k], lam0[k])
                    - _RATE_SAFETY,
                )
                # lambda_k <= gamma_c via the difference-of-squares split
                quads = []
                rhs = links.rho_c[k] * pc - links.c * lam_v[k]
                for kp in range(size):
                    quad, part = _bilinear_pair(
                        p[kp], lam_v[k], p0[kp], lam0[k], links.a[k, kp],
                        x_floor=split_floor,
                    )
                    quads.append(quad)
                    rhs = rhs + part
                quad, part = _bilinear_pair(
                    pc, lam_v[k], pc0, lam0[k], links.b[k], x_floor=split_floor
                )
                quads.append(quad)
                rhs = rhs + part
                prog.add_quadratic_upper_bound(quads, rhs)
            if on_p[k]:
                v = prog.add_variable(f"v{j}_{k}")
                prog.add_log_lower_bound(v, Affine(const=1.0) + mu_v[k])
                pin = pin + _LOG_PIN * v
                prog.add_le(
                    rp[k],
                    v * (1.0 / _LN2)
                    - theta * _phi_tangent(mu_v[k], mu0[k])
                    - _RATE_SAFETY,
                )
                quads = []
                rhs = links.rho_p[k, k] * p[k] - links.c * mu_v[k]
                for kp in range(size):
                    if kp == k:
                        continue
                    quad, part = _bilinear_pair(
                        p[kp], mu_v[k], p0[kp], mu0[k], links.a[k, kp],
                        x_floor=split_floor,
                    )
                    quads.append(quad)
                    rhs = rhs + part
                if on_c:
                    quad, part = _bilinear_pair(
                        pc, mu_v[k], pc0, mu0[k], links.b[k], x_floor=split_floor
                    )
                    quads.append(quad)
                    rhs = rhs + part
                quad, part = _bilinear_pair(
                    p[k], mu_v[k], p0[k], mu0[k], links.b[k], x_floor=split_floor
                )
                quads.append(quad)
                rhs = rhs + part
                prog.add_quadratic_upper_bound(quads, rhs)

        if on_c:
            prog.add_le(sum(shares, Affine()), rc)
        for k in range(size):
            total = Affine()
            if on_c:
                total = total + shares[k]
            if on_p[k]:
                total = total + rp[k]
            prog.add_nonneg(total - cfg.min_rate_bps_hz)
            if on_p[k]:
                objective = objective + (1.0 - 2.0 * eps) * rp[k]
            if on_c:
                objective = objective + (1.0 - eps) * shares[k]

        power_sum = sum(p, Affine())
        if on_c:
            power_sum = power_sum + pc
        if joint:
            budget = prog.add_variable(f"pmax{j}")
            prog.add_nonneg(budget)
            prog.add_le(power_sum, budget)
            budget_vars.append(budget)
            handles["budget"][j] = budget
        else:
            prog.add_le(power_sum, budget_mw)

        handles["p"][j] = p
        handles["pc"][j] = pc
        handles["rc"][j] = rc
        handles["shares"][j] = shares
        handles["rp"][j] = rp
        handles["lam"][j] = lam_v
        handles["mu"][j] = mu_v

    if joint and budget_vars:
        prog.add_le(sum(budget_vars, Affine()), cfg.max_total_power_w * W_TO_MW)
    prog.maximize(objective + pin)
    return prog, handles, budget_mw


def _extract_iterate(problem, sol, handles, structure, budget_mw):
    """Pull powers (W), rates, and the next linearization point."""
    cfg = problem.config
    j_total = problem.num_groups
    sizes = problem.groups.sizes
    out = AllocationSolution.empty(j_total, sizes, status=sol.status)
    out.feasible = True
    out.status = sol.status
    lam_next: List[np.ndarray] = [np.zeros(0)] * j_total
    mu_next: List[np.ndarray] = [np.zeros(0)] * j_total
    lower_bound = 0.0
    for j, members, _ in problem.active_groups():
        size = len(members)
        p = np.array([max(0.0, sol.value(v)) for v in handles["p"][j]])
        out.private_power[j] = p / W_TO_MW
        if handles["budget"].get(j) is not None:
            out.subcarrier_budgets[j] = max(0.0, sol.value(handles["budget"][j])) / W_TO_MW
        else:
            out.subcarrier_budgets[j] = budget_mw / W_TO_MW
        if structure.common_on[j]:
            out.common_power[j] = max(0.0, sol.value(handles["pc"][j])) / W_TO_MW
            r_c = max(0.0, sol.value(handles["rc"][j]))
            shares = np.array(
                [max(0.0, sol.value(v)) for v in handles["shares"][j]]
            )
            if r_c < RATE_CLEANUP:
                r_c = 0.0
                shares[:] = 0.0
            elif shares.sum() > r_c:
                shares *= r_c / shares.sum()
            out.common_stream_rate[j] = r_c
            out.common_rate_shares[j] = shares
            lam_next[j] = np.array(
                [max(_SINR_FLOOR, sol.value(v)) for v in handles["lam"][j]]
            )
        rates = np.zeros(size)
        mus = np.full(size, _SINR_FLOOR)
        for k in range(size):
            if structure.private_on[j][k]:
                rates[k] = max(0.0, sol.value(handles["rp"][j][k]))
                mus[k] = max(_SINR_FLOOR, sol.value(handles["mu"][j][k]))
        rates[rates < RATE_CLEANUP] = 0.0
        out.private_rates[j] = rates
        mu_next[j] = mus
        lower_bound += float(
            (1.0 - cfg.error_threshold) * out.common_rate_shares[j].sum()
            + (1.0 - 2.0 * cfg.error_threshold) * rates.sum()
        )
    out.sum_et_lower_bound = lower_bound
    state = CccpState(
        iteration=0,
        lam=lam_next,
        mu=mu_next,
        private_power=[np.array(p) for p in out.private_power],
        common_power=np.array(out.common_power),
    )
    # empty groups keep an all-zero placeholder so indices line up
    return out, state


def _run_loop(
    problem: AllocationProblem,
    structure: _Structure,
    state: CccpState,
    tol: float,
    max_iters: int,
    conic_tol: float,
) -> Optional[AllocationSolution]:
    """One monotone CCCP run from a fixed starting point/structure."""
    best: Optional[AllocationSolution] = None
    trace: List[float] = []
    prev_obj = -math.inf
    status = "max_iters"
    for it in range(max_iters):
        prog, handles, budget_mw = _build_subproblem(problem, state, structure)
        sol = prog.solve(tol=conic_tol)
        if sol.status != "optimal":
            if best is None:
                return None
            status = "numerical_failure"
            break
        obj = float(sol.objective_value)
        if obj < prev_obj - 1e-10:
            # below solver noise of the previous subproblem; treat as converged
            status = "optimal"
            break
        iterate, state = _extract_iterate(problem, sol, handles, structure, budget_mw)
        best = iterate
        trace.append(obj)
        if it >= 1 and abs(obj - prev_obj) <= tol:
            status = "optimal"
            prev_obj = obj
            break
        prev_obj = obj
    if best is None:
        return None
    best.solver_trace = trace
    best.status = status
    best.iterations = len(trace)
    best.feasible = True
    return best


def cccp_solve(
    problem: AllocationProblem,
    init: Optional[AllocationSolution] = None,
    tol: float = 1e-4,
    max_iters: int = 50,
    conic_tol: float = CONIC_TOL,
) -> AllocationSolution:
    """Run the CCCP until |delta objective| <= tol.

    An RSMA solve races two starts: the feasibility point with the common
    power folded into the private streams, and (when viable) the
    feasibility point with its common stream alive; the better final
    objective wins.  The first start makes the result at least as good as
    the SDMA restriction of the same procedure.  Returns the
    zero-throughput infeasible solution when the feasibility check fails;
    ``status='max_iters'`` flags a hit iteration cap.
    """
    cfg = problem.config
    if cfg.error_threshold > 1e-4:
        raise ValueError("lower-bound objective requires error_threshold <= 1e-4")
    sizes = problem.groups.sizes
    if not any(sizes):
        return AllocationSolution.empty(problem.num_groups, sizes, status="optimal")

    candidates = _starting_candidates(problem, init)
    if not candidates:
        return AllocationSolution.empty(problem.num_groups, sizes, status="infeasible")

    best: Optional[AllocationSolution] = None
    for idx, (structure, state) in enumerate(candidates):
        iters = max_iters if idx == 0 else min(max_iters, _COMMON_RUN_ITERS)
        run = _run_loop(problem, structure, state, tol, iters, conic_tol)
        if run is None:
            continue
        if best is None or run.sum_et_lower_bound > best.sum_et_lower_bound + 1e-12:
            best = run
    if best is None:
        return AllocationSolution.empty(
            problem.num_groups, sizes, status="numerical_failure"
        )
    best.sum_et_exact = exact_et(best, problem.per_group_links, cfg)
    return best
