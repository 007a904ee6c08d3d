"""Dense two-phase simplex with Bland's rule: the independent reference for
linear programs of the form  min c'x  s.t.  A x <= b,  x >= 0."""

import numpy as np


def solve_lp(c, a, b, max_pivots=20000):
    """Returns (status, x, objective) with status in
    optimal | infeasible | unbounded."""
    c = np.asarray(c, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float).copy()
    m, n = a.shape

    # standard form with slacks: [A I] [x; s] = b
    tab_a = np.hstack([a, np.eye(m)])
    total = n + m
    # flip rows with negative rhs so phase 1 can start from artificials
    neg = b < 0
    tab_a[neg] *= -1.0
    b[neg] *= -1.0

    basis = list(range(total, total + m))
    tab = np.hstack([tab_a, np.eye(m), b[:, None]])

    def pivot(row, col):
        tab[row] /= tab[row, col]
        for r in range(m):
            if r != row and tab[r, col] != 0.0:
                tab[r] -= tab[r, col] * tab[row]
        basis[row] = col

    def run_phase(cost, allowed):
        for _ in range(max_pivots):
            # reduced costs under Bland's rule
            y = np.zeros(len(cost))
            y[basis] = 0.0
            red = cost.copy()
            for r, bv in enumerate(basis):
                if cost[bv] != 0.0:
                    red -= cost[bv] * tab[r, :len(cost)]
            enter = -1
            for j in range(allowed):
                if red[j] < -1e-10:
                    enter = j
                    break
            if enter < 0:
                return True
            ratios = [
                (tab[r, -1] / tab[r, enter], basis[r], r)
                for r in range(m)
                if tab[r, enter] > 1e-12
            ]
            if not ratios:
                return False  # unbounded direction
            _, _, row = min(ratios, key=lambda t: (t[0], t[1]))
            pivot(row, enter)
        raise RuntimeError("simplex cycling guard tripped")

    # phase 1: minimize the sum of artificials
    cost1 = np.zeros(total + m)
    cost1[total:] = 1.0
    run_phase(cost1, total + m)
    art_value = sum(tab[r, -1] for r, bv in enumerate(basis) if bv >= total)
    if art_value > 1e-8:
        return "infeasible", None, None
    # drive any degenerate artificials out of the basis
    for r in range(m):
        if basis[r] >= total:
            for j in range(total):
                if abs(tab[r, j]) > 1e-9:
                    pivot(r, j)
                    break

    cost2 = np.zeros(total + m)
    cost2[:n] = c
    bounded = run_phase(cost2, total)
    if not bounded:
        return "unbounded", None, None
    x = np.zeros(n)
    for r, bv in enumerate(basis):
        if bv < n:
            x[bv] = tab[r, -1]
    return "optimal", x, float(c @ x)
