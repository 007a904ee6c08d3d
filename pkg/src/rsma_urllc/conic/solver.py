"""Primal-dual interior-point solver on the homogeneous self-dual embedding.

Problem form:   minimize c'x  s.t.  A x + s = b,  s in K,
with K a product of zero, nonnegative, second-order and exponential cones.

The embedding tracks (x, z, tau, s, kappa) with residuals

    r_d = A' z + c tau          (dual)
    r_p = A x + s - b tau       (primal)
    r_g = c' x + b' z + kappa   (gap)

and drives them to zero along the central path.  tau > 0 at convergence
yields an optimal pair (x, s, z) / tau; tau -> 0 with kappa > 0 yields an
infeasibility or unboundedness certificate.  Search directions use the
Hessian of the dual barrier at the current dual iterate (dual scaling),
which handles the nonsymmetric exponential cone uniformly; step sizes are
safeguarded by a fraction-to-boundary rule.

Data is Ruiz-equilibrated before solving (uniform scaling inside each SOC
and exponential block so cone membership is preserved).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
import scipy.linalg

from .cones import ConeLayout
from .program import CompiledProgram

__all__ = ["RawSolution", "solve_compiled"]

_FTB = 0.98          # fraction to boundary
_REG = 1e-11         # static KKT regularization
_MIN_STEP = 1e-11


@dataclass
class RawSolution:
    status: str
    primal: np.ndarray
    dual: np.ndarray
    slack: np.ndarray
    objective_value: float
    iterations: int
    residuals: Tuple[float, float, float]
    trace: List[Tuple[float, float]] = field(default_factory=list)


def _ruiz_equilibrate(a, b, c, cones: ConeLayout, iters: int = 8):
    """Row/column equilibration with uniform row scaling inside cone blocks."""
    m, n = a.shape
    d_row = np.ones(m)
    d_col = np.ones(n)
    # block id per row; nonneg/zero rows scale individually
    block_of = np.arange(m)
    for sl in cones.soc_slices():
        block_of[sl] = sl.start
    for i in range(cones.n_exp):
        start = cones.i_exp + 3 * i
        block_of[start:start + 3] = start
    a_s = a.copy()
    for _ in range(iters):
        row_max = np.abs(a_s).max(axis=1)
        # uniform within blocks: take the max over each block
        for blk in np.unique(block_of):
            sel = block_of == blk
            row_max[sel] = row_max[sel].max()
        row_max[row_max == 0] = 1.0
        r = 1.0 / np.sqrt(row_max)
        col_max = np.abs(a_s * r[:, None]).max(axis=0)
        col_max[col_max == 0] = 1.0
        q = 1.0 / np.sqrt(col_max)
        a_s = a_s * r[:, None] * q[None, :]
        d_row *= r
        d_col *= q
    b_s = b * d_row
    c_s = c * d_col
    # normalize rhs/cost norms to ~1 so badly scaled data (tiny watt-level
    # coefficients) still drives the interior-point iteration
    nb = np.linalg.norm(b_s)
    nc = np.linalg.norm(c_s)
    sigma_b = float(np.clip(nb, 1e-8, 1e8)) if nb > 0 else 1.0
    sigma_c = float(np.clip(nc, 1e-8, 1e8)) if nc > 0 else 1.0
    return a_s, b_s / sigma_b, c_s / sigma_c, d_row, d_col, sigma_b, sigma_c


def _kkt_solve(lu_piv, kkt_true, n, rhs_x, rhs_z, refine: int = 2):
    """Solve the regularized KKT system, then refine against the
    unregularized matrix to recover the accuracy lost to the static
    regularization."""
    rhs = np.concatenate([rhs_x, rhs_z])
    sol = scipy.linalg.lu_solve(lu_piv, rhs)
    for _ in range(refine):
        resid = rhs - kkt_true @ sol
        corr = scipy.linalg.lu_solve(lu_piv, resid)
        sol = sol + corr
        if np.linalg.norm(resid) <= 1e-14 * (1.0 + np.linalg.norm(rhs)):
            break
    return sol[:n], sol[n:]


def solve_compiled(
    prog: CompiledProgram,
    tol: float = 1e-8,
    max_iters: int = 200,
    verbose: bool = False,
) -> RawSolution:
    cones = prog.cones
    a0, b0, c0 = prog.a, prog.b, prog.c
    m, n = a0.shape
    if m == 0:
        # unconstrained: bounded only if c = 0
        status = "optimal" if not np.any(c0) else "unbounded"
        return RawSolution(status, np.zeros(n), np.zeros(0), np.zeros(0),
                           0.0, 0, (0.0, 0.0, 0.0))

    a, b, c, d_row, d_col, sigma_b, sigma_c = _ruiz_equilibrate(a0, b0, c0, cones)

    nu = cones.degree + 1
    x = np.zeros(n)
    s, z = cones.initial_points()
    tau, kappa = 1.0, 1.0

    norm_b0 = 1.0 + np.linalg.norm(b0)
    norm_c0 = 1.0 + np.linalg.norm(c0)

    best = None
    best_metric = np.inf
    stall = 0
    ratio0 = None   # initial residual-to-mu balance, anchors the guard below
    trace: List[Tuple[float, float]] = []

    def unscaled(xv, zv, sv, tauv):
        xs = d_col * xv / tauv * sigma_b
        zs = d_row * zv / tauv * sigma_c
        ss = sv / d_row / tauv * sigma_b
        return xs, zs, ss

    norm_bs = 1.0 + np.linalg.norm(b)
    norm_cs = 1.0 + np.linalg.norm(c)

    def convergence_metrics(xv, zv, sv, tauv):
        xs, zs, ss = unscaled(xv, zv, sv, tauv)
        pres = np.linalg.norm(a0 @ xs + ss - b0) / norm_b0
        dres = np.linalg.norm(a0.T @ zs + c0) / norm_c0
        pobj = c0 @ xs
        dobj = -b0 @ zs
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        # residuals of the equilibrated problem: tiny-norm data is upscaled
        # internally, so these keep the iteration honest when the unscaled
        # relative residuals are trivially small
        pres_s = np.linalg.norm(a @ xv + sv - b * tauv) / tauv / norm_bs
        dres_s = np.linalg.norm(a.T @ zv + c * tauv) / tauv / norm_cs
        pobj_s = c @ xv / tauv
        dobj_s = -b @ zv / tauv
        gap_s = abs(pobj_s - dobj_s) / (1.0 + abs(pobj_s) + abs(dobj_s))
        scaled = (pres_s, dres_s, gap_s)
        return pres, dres, gap, pobj, dobj, xs, zs, ss, scaled

    status = "numerical_failure"
    iters_done = 0
    final = None

    for it in range(max_iters):
        iters_done = it
        r_d = a.T @ z + c * tau
        r_p = a @ x + s - b * tau
        r_g = c @ x + b @ z + kappa
        mu = (s @ z + tau * kappa) / nu

        pres, dres, gap, pobj, dobj, xs, zs, ss, scaled = convergence_metrics(x, z, s, tau)
        trace.append((pobj, dobj))
        if verbose:
            print(f"  it {it:3d}  mu {mu:9.2e}  pres {pres:9.2e} dres {dres:9.2e} "
                  f"gap {gap:9.2e}  tau {tau:9.2e} kappa {kappa:9.2e}")
        if max(pres, scaled[0]) <= tol and max(dres, scaled[1]) <= tol \
                and max(gap, scaled[2]) <= tol:
            status = "optimal"
            final = (xs, zs, ss, pobj, (pres, dres, gap))
            break

        metric = max(pres, dres, gap, *scaled)
        if metric < best_metric * (1.0 - 1e-3):
            best_metric = metric
            best = (x.copy(), z.copy(), s.copy(), tau)
            stall = 0
        else:
            stall += 1
            if stall >= 15 and it >= 30:
                break

        # infeasibility / unboundedness certificates (scaled space)
        bz = b @ z
        cx = c @ x
        if bz < -1e-10:
            zc = z / (-bz)
            if np.linalg.norm(a.T @ zc) <= tol * 10:
                zs_cert = d_row * zc * sigma_c
                status = "infeasible"
                final = (np.full(n, np.nan), zs_cert, np.full(m, np.nan), np.nan,
                         (pres, dres, gap))
                break
        if cx < -1e-10:
            xc = x / (-cx)
            sc = s / (-cx)
            if np.linalg.norm(a @ xc + sc) <= tol * 10:
                xs_cert = d_col * xc * sigma_b
                status = "unbounded"
                final = (xs_cert, np.full(m, np.nan), np.full(m, np.nan), -np.inf,
                         (pres, dres, gap))
                break

        # KKT matrix: NT scaling for symmetric cones, dual-barrier Hessian
        # for the exponential ones
        try:
            h = cones.scaling(s, z, mu)
        except (np.linalg.LinAlgError, FloatingPointError, ValueError):
            break
        kkt_true = np.zeros((n + m, n + m))
        kkt_true[:n, n:] = a.T
        kkt_true[n:, :n] = a
        kkt_true[n:, n:] = -h
        kkt = kkt_true.copy()
        kkt[:n, :n] += _REG * np.eye(n)
        kkt[n + cones.zero:, n + cones.zero:] -= _REG * np.eye(m - cones.zero)
        try:
            lu_piv = scipy.linalg.lu_factor(kkt)
        except (scipy.linalg.LinAlgError, ValueError):
            break

        # constant column (for the tau elimination)
        dx1, dz1 = _kkt_solve(lu_piv, kkt_true, n, -c, b)

        grad = cones.grad_dual(z)
        nn = slice(cones.i_nonneg, cones.i_soc)

        def direction(sigma, corr_s=None, corr_tk=0.0):
            # cone centering residuals (Mehrotra second-order terms enter on
            # the nonnegative block and the tau/kappa pair only)
            d_s = s + sigma * mu * grad
            if corr_s is not None:
                d_s = d_s + corr_s
            d_s[:cones.zero] = 0.0
            rhs_x = -(1.0 - sigma) * r_d
            rhs_z = -(1.0 - sigma) * r_p + d_s
            dx2, dz2 = _kkt_solve(lu_piv, kkt_true, n, rhs_x, rhs_z)
            denom = (c @ dx1 + b @ dz1) - kappa / tau
            num = (-(1.0 - sigma) * r_g + kappa - sigma * mu / tau + corr_tk
                   - c @ dx2 - b @ dz2)
            d_tau = num / denom if abs(denom) > 1e-300 else 0.0
            dx = dx2 + d_tau * dx1
            dz = dz2 + d_tau * dz1
            ds = -d_s - h @ dz
            ds[:cones.zero] = 0.0
            d_kap = -kappa + sigma * mu / tau - corr_tk - (kappa / tau) * d_tau
            return dx, dz, d_tau, ds, d_kap

        # affine probe for the centering weight
        dx_a, dz_a, dtau_a, ds_a, dkap_a = direction(0.0)
        alpha_a = _step_length(cones, s, ds_a, z, dz_a, tau, dtau_a, kappa, dkap_a)
        mu_a = ((s + alpha_a * ds_a) @ (z + alpha_a * dz_a)
                + (tau + alpha_a * dtau_a) * (kappa + alpha_a * dkap_a)) / nu
        sigma = min(0.99, max(1e-8, (mu_a / mu) ** 3))

        dx_c, dz_c, dtau_c, ds_c, dkap_c = direction(sigma)
        alpha = _centered_step(cones, nu, s, ds_c, z, dz_c, tau, dtau_c,
                               kappa, dkap_c)
        if alpha <= 1e-6:
            # pure centering rescue for ill-centered iterates
            sigma = 1.0
            dx_c, dz_c, dtau_c, ds_c, dkap_c = direction(1.0)
            alpha = _centered_step(cones, nu, s, ds_c, z, dz_c, tau, dtau_c,
                                   kappa, dkap_c)

        # residual/complementarity balance guard: the simplified homogeneous
        # model has no exact orthogonality of (ds, dz), so the average
        # complementarity can collapse much faster than the residuals,
        # stranding the iterate at a non-optimal boundary point; residuals
        # shrink linearly in alpha, so keep their ratio to mu anchored
        rnorm = math.sqrt(r_d @ r_d + r_p @ r_p + r_g * r_g)
        if ratio0 is None:
            ratio0 = max(rnorm / mu, 1e-12)
        eta_step = 1.0 - sigma
        for _ in range(20):
            if alpha <= _MIN_STEP:
                break
            mu_next = ((s + alpha * ds_c) @ (z + alpha * dz_c)
                       + (tau + alpha * dtau_c) * (kappa + alpha * dkap_c)) / nu
            if (1.0 - alpha * eta_step) * rnorm <= 1e3 * ratio0 * max(mu_next, 1e-300):
                break
            alpha *= 0.7
        if alpha <= _MIN_STEP:
            break
        x = x + alpha * dx_c
        z = z + alpha * dz_c
        s = s + alpha * ds_c
        tau = tau + alpha * dtau_c
        kappa = kappa + alpha * dkap_c

    else:
        iters_done = max_iters

    if final is None:
        # fell out of the loop without a verdict; report best iterate
        if best is not None:
            pres, dres, gap, pobj, dobj, xs, zs, ss, scaled = convergence_metrics(*best)
            if max(pres, *scaled[:1]) <= tol * 100 and dres <= tol * 100 and gap <= tol * 100:
                status = "optimal"
            else:
                status = "numerical_failure"
            final = (xs, zs, ss, pobj, (pres, dres, gap))
        else:
            final = (np.full(n, np.nan), np.full(m, np.nan), np.full(m, np.nan),
                     np.nan, (np.inf, np.inf, np.inf))

    xs, zs, ss, pobj, resids = final
    return RawSolution(
        status=status,
        primal=xs,
        dual=zs if zs.shape == (m,) else np.full(m, np.nan),
        slack=ss,
        objective_value=pobj,
        iterations=iters_done,
        residuals=resids,
        trace=trace,
    )


def _step_length(cones, s, ds, z, dz, tau, dtau, kappa, dkappa) -> float:
    t = cones.max_step(s, ds, z, dz)
    if dtau < 0:
        t = min(t, -tau / dtau)
    if dkappa < 0:
        t = min(t, -kappa / dkappa)
    return min(1.0, _FTB * t)


_NEIGHBORHOOD = 1e-5


def _centered_step(cones, nu, s, ds, z, dz, tau, dtau, kappa, dkappa) -> float:
    """Fraction-to-boundary step, backtracked until the iterate stays in a
    central-path neighborhood: complementarity products stay above a small
    fraction of their average, and the exponential blocks stay within the
    barrier proximity bound.  Prevents both the step collapse seen on
    degenerate optimal faces and the drift onto an exponential-cone
    boundary face."""
    alpha = _step_length(cones, s, ds, z, dz, tau, dtau, kappa, dkappa)
    nn = slice(cones.i_nonneg, cones.i_soc)
    for _ in range(16):
        if alpha <= _MIN_STEP:
            return alpha
        s_n = s + alpha * ds
        z_n = z + alpha * dz
        tau_n = tau + alpha * dtau
        kappa_n = kappa + alpha * dkappa
        mu_n = (s_n @ z_n + tau_n * kappa_n) / nu
        floor = _NEIGHBORHOOD * mu_n
        ok = tau_n * kappa_n >= floor
        if ok and nn.stop > nn.start:
            ok = bool(np.min(s_n[nn] * z_n[nn]) >= floor)
        if ok:
            for sl in cones.soc_slices():
                if s_n[sl] @ z_n[sl] < 2.0 * floor:
                    ok = False
                    break
        if ok and cones.n_exp:
            prods = np.einsum(
                "ij,ij->i", cones.exp_view(s_n), cones.exp_view(z_n)
            )
            ok = bool(np.min(prods) >= 3.0 * floor)
        if ok:
            return alpha
        alpha *= 0.7
    return alpha
