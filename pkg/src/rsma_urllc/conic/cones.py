"""Cone operations for the interior-point solver.

Rows of a compiled program are ordered zero | nonneg | second-order | exp.
The solver follows the dual-scaling approach: every cone block contributes
the Hessian of its dual barrier evaluated at the current dual iterate.

Barriers (logarithmically homogeneous, degrees 1 / 2 / 3):

* nonneg      F*(z) = -sum ln z_i
* second-order F*(z) = -ln(z0^2 - ||z1||^2)
* exponential  primal cone  {(x,y,z): y>0, y e^{x/y} <= z}
               dual cone    {(u,v,w): u<0, -u e^{v/u} <= e w}
               F*(z) = -ln(v - u - u ln(w/(-u))) - ln(-u) - ln w
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

__all__ = ["ConeLayout", "EXP_PRIMAL_CENTRAL", "EXP_DUAL_CENTRAL"]

# Unit central points t with grad F(t) = -t, computed once by Newton iteration
# on the respective barriers and frozen here (verified in the test suite).
EXP_PRIMAL_CENTRAL = np.array([-0.8278384105319232, 0.8051020015189818, 1.2909277090022668])
EXP_DUAL_CENTRAL = np.array([-1.0513839453227141, 0.5564096194693704, 1.2589678847689467])


@dataclass
class ConeLayout:
    """Sizes and row offsets of each cone section."""

    zero: int = 0
    nonneg: int = 0
    soc_dims: List[int] = field(default_factory=list)
    n_exp: int = 0

    # derived offsets
    def __post_init__(self):
        self.i_nonneg = self.zero
        self.i_soc = self.i_nonneg + self.nonneg
        self.soc_starts = []
        off = self.i_soc
        for d in self.soc_dims:
            if d < 2:
                raise ValueError("second-order cone blocks need length >= 2")
            self.soc_starts.append(off)
            off += d
        self.i_exp = off
        self.m = self.i_exp + 3 * self.n_exp

    @property
    def degree(self) -> int:
        """Total barrier degree (zero cone contributes nothing)."""
        return self.nonneg + 2 * len(self.soc_dims) + 3 * self.n_exp

    # -- views ---------------------------------------------------------------

    def exp_view(self, v: np.ndarray) -> np.ndarray:
        return v[self.i_exp:].reshape(self.n_exp, 3)

    def soc_slices(self):
        for start, d in zip(self.soc_starts, self.soc_dims):
            yield slice(start, start + d)

    # -- initial points -------------------------------------------------------

    def initial_points(self) -> Tuple[np.ndarray, np.ndarray]:
        s = np.zeros(self.m)
        z = np.zeros(self.m)
        s[self.i_nonneg:self.i_soc] = 1.0
        z[self.i_nonneg:self.i_soc] = 1.0
        for sl in self.soc_slices():
            s[sl.start] = 1.0
            z[sl.start] = 1.0
        if self.n_exp:
            self.exp_view(s)[:] = EXP_PRIMAL_CENTRAL
            self.exp_view(z)[:] = EXP_DUAL_CENTRAL
        return s, z

    # -- membership ----------------------------------------------------------

    def inside_primal(self, s: np.ndarray) -> bool:
        if np.any(s[self.i_nonneg:self.i_soc] <= 0.0):
            return False
        for sl in self.soc_slices():
            head = s[sl.start]
            if head <= 0.0 or head * head - s[sl.start + 1:sl.stop] @ s[sl.start + 1:sl.stop] <= 0.0:
                return False
        if self.n_exp:
            e = self.exp_view(s)
            x, y, zc = e[:, 0], e[:, 1], e[:, 2]
            if np.any(y <= 0.0) or np.any(zc <= 0.0):
                return False
            if np.any(y * np.log(zc / y) - x <= 0.0):
                return False
        return True

    def inside_dual(self, z: np.ndarray) -> bool:
        # zero-cone duals are free
        if np.any(z[self.i_nonneg:self.i_soc] <= 0.0):
            return False
        for sl in self.soc_slices():
            head = z[sl.start]
            if head <= 0.0 or head * head - z[sl.start + 1:sl.stop] @ z[sl.start + 1:sl.stop] <= 0.0:
                return False
        if self.n_exp:
            e = self.exp_view(z)
            u, v, w = e[:, 0], e[:, 1], e[:, 2]
            if np.any(u >= 0.0) or np.any(w <= 0.0):
                return False
            if np.any(v - u - u * np.log(w / (-u)) <= 0.0):
                return False
        return True

    # -- dual barrier derivatives ---------------------------------------------

    def grad_dual(self, z: np.ndarray) -> np.ndarray:
        """Gradient of the dual barrier; zero on the zero-cone section."""
        g = np.zeros(self.m)
        nn = slice(self.i_nonneg, self.i_soc)
        g[nn] = -1.0 / z[nn]
        for sl in self.soc_slices():
            zb = z[sl]
            jz = zb.copy()
            jz[1:] = -jz[1:]
            g[sl] = -2.0 * jz / (zb @ jz)
        if self.n_exp:
            e = self.exp_view(z)
            u, v, w = e[:, 0], e[:, 1], e[:, 2]
            d = v - u - u * np.log(w / (-u))
            ge = self.exp_view(g)
            ge[:, 0] = np.log(w / (-u)) / d - 1.0 / u
            ge[:, 1] = -1.0 / d
            ge[:, 2] = (u / w) / d - 1.0 / w
        return g

    def hess_dual(self, z: np.ndarray) -> np.ndarray:
        """Dense Hessian of the dual barrier (block diagonal, zero block for
        the zero cone)."""
        h = np.zeros((self.m, self.m))
        nn = slice(self.i_nonneg, self.i_soc)
        idx = np.arange(nn.start, nn.stop)
        h[idx, idx] = 1.0 / z[nn] ** 2
        for sl in self.soc_slices():
            zb = z[sl]
            jz = zb.copy()
            jz[1:] = -jz[1:]
            q = zb @ jz
            jmat = -np.eye(sl.stop - sl.start)
            jmat[0, 0] = 1.0
            h[sl, sl] = 4.0 * np.outer(jz, jz) / q ** 2 - 2.0 * jmat / q
        if self.n_exp:
            e = self.exp_view(z)
            u, v, w = e[:, 0], e[:, 1], e[:, 2]
            lw = np.log(w / (-u))
            d = v - u - u * lw
            # d gradient and second derivatives
            gd = np.stack([-lw, np.ones_like(u), -u / w], axis=1)
            blocks = np.einsum("ei,ej->eij", gd, gd) / d[:, None, None] ** 2
            h2 = np.zeros((self.n_exp, 3, 3))
            h2[:, 0, 0] = 1.0 / u
            h2[:, 0, 2] = h2[:, 2, 0] = -1.0 / w
            h2[:, 2, 2] = u / w ** 2
            blocks -= h2 / d[:, None, None]
            blocks[:, 0, 0] += 1.0 / u ** 2
            blocks[:, 2, 2] += 1.0 / w ** 2
            for i in range(self.n_exp):
                sl = slice(self.i_exp + 3 * i, self.i_exp + 3 * i + 3)
                h[sl, sl] = blocks[i]
        return h

    def scaling(self, s: np.ndarray, z: np.ndarray, mu: float) -> np.ndarray:
        """Block-diagonal scaling matrix H for the Newton system.

        Symmetric cones use the Nesterov-Todd point (H z = s exactly);
        the nonsymmetric exponential cone falls back to mu times the dual
        barrier Hessian.  The zero-cone block stays zero.
        """
        h = np.zeros((self.m, self.m))
        nn = slice(self.i_nonneg, self.i_soc)
        idx = np.arange(nn.start, nn.stop)
        h[idx, idx] = s[nn] / z[nn]
        for sl in self.soc_slices():
            sb, zb = s[sl], z[sl]
            d = sl.stop - sl.start
            jmat = -np.eye(d)
            jmat[0, 0] = 1.0
            res_s = sb @ jmat @ sb
            res_z = zb @ jmat @ zb
            if res_s <= 0.0 or res_z <= 0.0:
                # rounding pushed the block onto its boundary; the dual
                # barrier Hessian is a valid positive-definite fallback
                q = zb @ jmat @ zb
                if q <= 0.0:
                    raise np.linalg.LinAlgError("SOC block left the cone")
                jz = jmat @ zb
                h[sl, sl] = mu * (
                    4.0 * np.outer(jz, jz) / q ** 2 - 2.0 * jmat / q
                )
                continue
            s_t = sb / math.sqrt(res_s)
            z_t = zb / math.sqrt(res_z)
            gamma = math.sqrt(max((1.0 + s_t @ z_t) / 2.0, 1e-300))
            w = (s_t + jmat @ z_t) / (2.0 * gamma)
            eta = math.sqrt(res_s / res_z)
            h[sl, sl] = eta * (2.0 * np.outer(w, w) - jmat)
        if self.n_exp:
            e = self.exp_view(z)
            u, v, w3 = e[:, 0], e[:, 1], e[:, 2]
            lw = np.log(w3 / (-u))
            d = v - u - u * lw
            gd = np.stack([-lw, np.ones_like(u), -u / w3], axis=1)
            blocks = np.einsum("ei,ej->eij", gd, gd) / d[:, None, None] ** 2
            h2 = np.zeros((self.n_exp, 3, 3))
            h2[:, 0, 0] = 1.0 / u
            h2[:, 0, 2] = h2[:, 2, 0] = -1.0 / w3
            h2[:, 2, 2] = u / w3 ** 2
            blocks -= h2 / d[:, None, None]
            blocks[:, 0, 0] += 1.0 / u ** 2
            blocks[:, 2, 2] += 1.0 / w3 ** 2
            for i in range(self.n_exp):
                sl = slice(self.i_exp + 3 * i, self.i_exp + 3 * i + 3)
                h[sl, sl] = mu * blocks[i]
        return h

    # -- step lengths ----------------------------------------------------------

    def _max_step_nonneg_like(self, v, dv) -> float:
        neg = dv < 0
        if not np.any(neg):
            return np.inf
        return float(np.min(-v[neg] / dv[neg]))

    def _max_step_soc(self, v, dv) -> float:
        """Largest t with (v + t dv) inside one SOC block."""
        a = dv[0] ** 2 - dv[1:] @ dv[1:]
        b = 2.0 * (v[0] * dv[0] - v[1:] @ dv[1:])
        c = v[0] ** 2 - v[1:] @ v[1:]
        # head positivity bound
        t_head = np.inf if dv[0] >= 0 else -v[0] / dv[0]
        # smallest positive root of c + b t + a t^2 (c > 0 strictly inside)
        t_quad = np.inf
        if abs(a) > 1e-300:
            disc = b * b - 4.0 * a * c
            if disc >= 0.0:
                sq = math.sqrt(disc)
                for r in ((-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)):
                    if r > 0.0:
                        t_quad = min(t_quad, r)
        elif abs(b) > 1e-300:
            r = -c / b
            if r > 0.0:
                t_quad = r
        return min(t_head, t_quad)

    def _max_step_exp(self, e, de, primal: bool, hi: float) -> float:
        """Bisection for the largest t <= hi keeping every exp cone inside."""
        if hi <= 0 or not np.isfinite(hi):
            hi = min(hi, 1e8) if np.isfinite(hi) else 1e8
        # linear prescreen on the sign-constrained coordinates
        if primal:
            lin_v = np.concatenate([e[:, 1], e[:, 2]])
            lin_d = np.concatenate([de[:, 1], de[:, 2]])
        else:
            lin_v = np.concatenate([-e[:, 0], e[:, 2]])
            lin_d = np.concatenate([-de[:, 0], de[:, 2]])
        neg = lin_d < 0
        if np.any(neg):
            hi = min(hi, float(np.min(-lin_v[neg] / lin_d[neg])) * (1.0 - 1e-12))

        if primal:
            def ok(t):
                c = e + t * de
                y, zc = c[:, 1], c[:, 2]
                if np.any(y <= 0.0) or np.any(zc <= 0.0):
                    return False
                return bool(np.all(y * np.log(zc / y) - c[:, 0] > 0.0))
        else:
            def ok(t):
                c = e + t * de
                u, w = c[:, 0], c[:, 2]
                if np.any(u >= 0.0) or np.any(w <= 0.0):
                    return False
                return bool(np.all(c[:, 1] - u - u * np.log(w / (-u)) > 0.0))

        if hi <= 0:
            return 0.0
        if ok(hi):
            return hi
        lo, t_hi = 0.0, hi
        for _ in range(40):
            mid = 0.5 * (lo + t_hi)
            if ok(mid):
                lo = mid
            else:
                t_hi = mid
            if t_hi - lo <= 1e-10 * max(1e-8, t_hi):
                break
        return lo

    def _max_step_soc_all(self, v, dv) -> float:
        """Largest t keeping every SOC block of v + t dv inside the cone."""
        if not self.soc_dims:
            return np.inf
        starts = np.asarray(self.soc_starts)
        ends = starts + np.asarray(self.soc_dims)
        t_best = np.inf
        vh, dh = v[starts], dv[starts]
        tail_vv = np.empty(len(starts))
        tail_vd = np.empty(len(starts))
        tail_dd = np.empty(len(starts))
        for i, (s0, s1) in enumerate(zip(starts, ends)):
            tv = v[s0 + 1:s1]
            td = dv[s0 + 1:s1]
            tail_vv[i] = tv @ tv
            tail_vd[i] = tv @ td
            tail_dd[i] = td @ td
        a = dh * dh - tail_dd
        b = 2.0 * (vh * dh - tail_vd)
        c = vh * vh - tail_vv
        for i in range(len(starts)):
            t_head = np.inf if dh[i] >= 0 else -vh[i] / dh[i]
            t_quad = np.inf
            if abs(a[i]) > 1e-300:
                disc = b[i] * b[i] - 4.0 * a[i] * c[i]
                if disc >= 0.0:
                    sq = math.sqrt(disc)
                    for r in ((-b[i] - sq) / (2.0 * a[i]), (-b[i] + sq) / (2.0 * a[i])):
                        if r > 0.0:
                            t_quad = min(t_quad, r)
            elif abs(b[i]) > 1e-300:
                r = -c[i] / b[i]
                if r > 0.0:
                    t_quad = r
            t_best = min(t_best, t_head, t_quad)
        return t_best

    def max_step(self, s, ds, z, dz) -> float:
        """Largest t with s + t ds in K and z + t dz in K* (boundary step)."""
        t = np.inf
        nn = slice(self.i_nonneg, self.i_soc)
        t = min(t, self._max_step_nonneg_like(s[nn], ds[nn]))
        t = min(t, self._max_step_nonneg_like(z[nn], dz[nn]))
        t = min(t, self._max_step_soc_all(s, ds))
        t = min(t, self._max_step_soc_all(z, dz))
        if self.n_exp:
            t = self._max_step_exp(self.exp_view(s), self.exp_view(ds), True, t)
            t = self._max_step_exp(self.exp_view(z), self.exp_view(dz), False, t)
        return t
