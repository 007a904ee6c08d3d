"""Exhaustive power-grid search for tiny single-carrier instances.

At every grid point the rates are set analytically: private rates at their
exact finite-blocklength caps (clamped at zero), the common stream rate at
the worst user's cap, and common shares split greedily to cover each user's
minimum-rate deficit.  Used as the independent optimum reference for the
convex solvers.
"""

from __future__ import annotations

import itertools
import math
from typing import Optional

import numpy as np

from .. import fbl
from ..scenario import derive_theta
from .sinr import exact_et
from .types import AllocationProblem, AllocationSolution

__all__ = ["brute_force_allocate"]


def brute_force_allocate(
    problem: AllocationProblem, grid_points_per_dim: int = 60
) -> AllocationSolution:
    """Exhaustive search over (p_1..p_K, p_c) on a uniform grid.

    Guarded to single-group problems with at most three users.  The
    returned objective is the same lower-bound utility the solvers
    maximize, so values are directly comparable.
    """
    cfg = problem.config
    active = list(problem.active_groups())
    if problem.num_groups != 1 or len(active) != 1:
        raise ValueError("brute force requires J = 1")
    j, members, links = active[0]
    size = len(members)
    if size > 3:
        raise ValueError("brute force capped at 3 users")
    if grid_points_per_dim < 2:
        raise ValueError("need at least 2 grid points per dimension")

    rsma = problem.mode == "rsma"
    p_max = cfg.max_total_power_w
    n_j = cfg.blocklength_per_subcarrier
    eps = cfg.error_threshold
    r_min = cfg.min_rate_bps_hz
    qinv = fbl.q_inverse(eps)
    ln2 = math.log(2.0)

    axes = [np.linspace(0.0, p_max, grid_points_per_dim)] * (size + (1 if rsma else 0))
    grids = np.meshgrid(*axes, indexing="ij")
    flat = np.stack([g.ravel() for g in grids], axis=1)  # (n_pts, size[+1])
    keep = flat.sum(axis=1) <= p_max + 1e-12
    flat = flat[keep]
    p = flat[:, :size]                      # (n, size)
    pc = flat[:, size] if rsma else np.zeros(len(flat))

    # exact SINRs, vectorized over grid points
    a, b, c = links.a, links.b, links.c
    rho_d = links.rho_private.diagonal()
    denom_c = p @ a.T + np.outer(pc, b) + c                   # (n, size)
    gamma_c = pc[:, None] * links.rho_common / denom_c
    cross = p @ a.T - p * a.diagonal()
    denom_p = cross + b * (p + pc[:, None]) + c
    gamma_p = p * rho_d / denom_p

    def rate(gam):
        v = 1.0 - (1.0 + gam) ** -2
        return np.log2(1.0 + gam) - qinv / ln2 * np.sqrt(v / n_j)

    rates_p = np.maximum(0.0, np.where(gamma_p > 0.0, rate(np.maximum(gamma_p, 1e-300)), 0.0))
    if rsma:
        rate_c = np.where(gamma_c > 0.0, rate(np.maximum(gamma_c, 1e-300)), 0.0)
        r_common = np.maximum(0.0, rate_c.min(axis=1))
    else:
        r_common = np.zeros(len(flat))

    deficit = np.maximum(0.0, r_min - rates_p).sum(axis=1)
    feasible = deficit <= r_common + 1e-12
    objective = np.where(
        feasible,
        (1.0 - eps) * r_common + (1.0 - 2.0 * eps) * rates_p.sum(axis=1),
        -np.inf,
    )
    best = int(np.argmax(objective))
    if not np.isfinite(objective[best]):
        return AllocationSolution.empty(1, [size], status="infeasible")

    p_best = p[best]
    pc_best = float(pc[best])
    rates_best = rates_p[best]
    r_c_best = float(r_common[best])
    shares = np.maximum(0.0, r_min - rates_best)
    leftover = r_c_best - shares.sum()
    shares[0] += max(0.0, leftover)

    out = AllocationSolution.empty(1, [size], status="optimal")
    out.feasible = True
    out.private_power[0] = p_best.copy()
    out.common_power[0] = pc_best
    out.subcarrier_budgets[0] = p_max
    out.common_stream_rate[0] = r_c_best
    out.common_rate_shares[0] = shares
    out.private_rates[0] = rates_best.copy()
    out.sum_et_lower_bound = float(objective[best])
    out.sum_et_exact = exact_et(out, problem.per_group_links, cfg)
    return out
