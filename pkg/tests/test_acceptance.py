"""Acceptance gate: one test per criterion, each printing a PASS line with
the measured numbers.  Tolerances are pinned here and nowhere else.

Run with ``pytest tests/test_acceptance.py -v -s``.
"""

import dataclasses
import math
import time
import warnings

import numpy as np
import pytest
from scipy import stats

from rsma_urllc import fbl
from rsma_urllc.allocation import (
    brute_force_allocate,
    build_problem,
    feasibility_check,
    recheck_constraints,
    solve_allocation,
)
from rsma_urllc.channel import sample_channels, sample_positions
from rsma_urllc.conic import ConicProgram
from rsma_urllc.grouping import (
    GroupAssignment,
    exhaustive_group,
    greedy_group,
    heuristic_group,
    random_group,
)
from rsma_urllc.harness import (
    MethodSpec,
    SweepSpec,
    apply_swept_parameter,
    emit_outputs,
    run_sweep,
    sample_trial_realization,
)
from rsma_urllc.scenario import ScenarioConfig, derive_rng_stream

from _simplex import solve_lp
from test_scenario import q_inverse_oracle

warnings.filterwarnings("ignore", message=".*flooring.*")


def _print_pass(num, text):
    print(f"\nCRITERION {num:2d} PASS: {text}")


def sign_test_improves(diffs, alpha=0.05, tie_tol=1e-9):
    """One-sided sign test that positive differences dominate."""
    wins = int(np.sum(diffs > tie_tol))
    losses = int(np.sum(diffs < -tie_tol))
    n = wins + losses
    if n == 0:
        return False, 1.0
    p = stats.binomtest(wins, n, 0.5, alternative="greater").pvalue
    return p < alpha, p


def sign_test_not_worse(diffs, alpha=0.05, tie_tol=1e-9):
    """No significant evidence that the differences are negative."""
    wins = int(np.sum(diffs > tie_tol))
    losses = int(np.sum(diffs < -tie_tol))
    n = wins + losses
    if n == 0:
        return True, 1.0  # all ties: cannot be worse
    p = stats.binomtest(losses, n, 0.5, alternative="greater").pvalue
    return p >= alpha, p


def test_criterion_01_lemma_suite():
    start = time.perf_counter()
    report = fbl.validate_lemma1(
        gamma_grid=[0.1, 1.0, 10.0, 100.0, 1000.0],
        eps_grid=[1e-4, 1e-5, 1e-6],
        blocklength_grid=[100, 1000, 10000],
    )
    elapsed = time.perf_counter() - start
    assert report.ok, report.violations
    # appendix gap bound: T(R*) - Rbar <= R* eps
    for (g, eps, n), gap in zip(report.points, report.gaps):
        r_star = fbl.fbl_rate(g, n, eps)
        if r_star > 0:
            assert gap <= r_star * eps + 1e-12
    assert elapsed < 5.0
    _print_pass(1, f"45 grid points monotone and bounded in {elapsed:.2f}s")


def test_criterion_02_fbl_golden_values():
    oracle = q_inverse_oracle(1e-5)
    value = fbl.q_inverse(1e-5)
    assert value == pytest.approx(4.26489, abs=1e-4)
    assert value == pytest.approx(oracle, abs=1e-4)
    rng = np.random.default_rng(2024)
    checked = 0
    worst = 0.0
    while checked < 100:
        g = 10 ** rng.uniform(-0.3, 3.0)
        n = int(rng.integers(100, 10001))
        eps = 10 ** rng.uniform(-6, -4)
        rate = fbl.fbl_rate(g, n, eps)
        if rate <= 0:
            continue
        err = abs(fbl.decode_error(g, rate, n) - eps) / eps
        worst = max(worst, err)
        assert err <= 1e-10
        checked += 1
    _print_pass(2, f"Q^-1(1e-5)={value:.5f}; 100 error round-trips, worst "
                   f"rel err {worst:.2e}")


def test_criterion_03_conic_solver():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(50):
        m, n = 10, 10
        a = rng.normal(size=(m, n))
        x0 = rng.uniform(0.1, 2.0, size=n)
        b = a @ x0 + rng.uniform(0.1, 1.0, size=m)
        c = rng.uniform(0.1, 2.0, size=n)
        status, _, ref = solve_lp(c, a, b)
        assert status == "optimal"
        prog = ConicProgram()
        xs = prog.add_variables(n)
        for x in xs:
            prog.add_nonneg(x)
        for i in range(m):
            prog.add_le(sum(a[i, j] * xs[j] for j in range(n)), b[i])
        prog.minimize(sum(c[j] * xs[j] for j in range(n)))
        sol = prog.solve(tol=1e-9)
        assert sol.status == "optimal"
        worst = max(worst, abs(sol.objective_value - ref))
        assert abs(sol.objective_value - ref) <= 1e-7

    # SOC toy with the Pythagorean optimum
    prog = ConicProgram()
    x, y, u = prog.add_variables(3)
    prog.add_quadratic_upper_bound([(1.0, x), (1.0, y)], u)
    prog.add_nonneg(x - 3)
    prog.add_nonneg(y - 4)
    prog.minimize(u)
    sol = prog.solve()
    assert math.sqrt(sol.objective_value) == pytest.approx(5.0, abs=1e-7)

    # exponential toy t* = 1 at x = e
    prog = ConicProgram()
    t, x = prog.add_variables(2)
    prog.add_log_lower_bound(t, x)
    prog.add_le(x, math.e)
    prog.maximize(t)
    sol = prog.solve()
    assert sol.objective_value == pytest.approx(1.0, abs=1e-7)

    # infeasible LP with a Farkas certificate
    prog = ConicProgram()
    x = prog.add_variable()
    prog.add_nonneg(x - 1)
    prog.add_le(x, 0.0)
    prog.minimize(x)
    sol = prog.solve()
    assert sol.status == "infeasible"
    compiled = prog.compile()
    z = sol.dual[compiled.row_perm]
    assert compiled.b @ z < 0
    assert np.linalg.norm(compiled.a.T @ z) <= 1e-6 * np.linalg.norm(z)
    _print_pass(3, f"50 LPs match simplex (worst {worst:.1e}); SOC/exp toys "
                   f"at 1e-7; infeasibility certified")


def test_criterion_04_cccp_convergence_fixture():
    start = time.perf_counter()
    cfg = ScenarioConfig.defaults(
        num_users=6, num_subcarriers=1, master_seed=2024
    )
    rng = derive_rng_stream(cfg, 0)
    real = sample_channels(cfg, sample_positions(cfg, rng), rng)
    prob = build_problem(real, GroupAssignment((tuple(range(6)),)), cfg)
    sol = solve_allocation(prob, "cccp")
    elapsed = time.perf_counter() - start
    assert sol.status == "optimal"
    trace = np.asarray(sol.solver_trace)
    assert np.all(np.diff(trace) >= -1e-9)
    assert len(trace) <= 20
    assert abs(trace[-1] - trace[-2]) <= 1e-4
    assert elapsed < 30.0
    _print_pass(4, f"trace of {len(trace)} monotone iterations, final delta "
                   f"{abs(trace[-1] - trace[-2]):.2e}, {elapsed:.1f}s")


def test_criterion_05_oracle_equivalence():
    start = time.perf_counter()
    ratios_cccp, ratios_lba = [], []
    for seed in range(10):
        cfg = ScenarioConfig.defaults(
            num_users=2, num_subcarriers=1, num_antennas=4, master_seed=seed
        )
        rng = derive_rng_stream(cfg, 0)
        real = sample_channels(cfg, sample_positions(cfg, rng), rng)
        prob = build_problem(real, GroupAssignment(((0, 1),)), cfg)
        oracle = brute_force_allocate(prob, 60)
        cccp = solve_allocation(prob, "cccp")
        lba = solve_allocation(prob, "lba")
        if not oracle.feasible:
            assert not cccp.feasible and not lba.feasible
            continue
        assert cccp.sum_et_lower_bound >= 0.95 * oracle.sum_et_lower_bound
        assert lba.sum_et_lower_bound >= 0.92 * oracle.sum_et_lower_bound
        ratios_cccp.append(cccp.sum_et_lower_bound / oracle.sum_et_lower_bound)
        ratios_lba.append(lba.sum_et_lower_bound / oracle.sum_et_lower_bound)
    elapsed = time.perf_counter() - start
    assert elapsed < 300.0
    _print_pass(5, f"10 instances: CCCP/oracle in [{min(ratios_cccp):.4f}, "
                   f"{max(ratios_cccp):.4f}], LBA/oracle in "
                   f"[{min(ratios_lba):.4f}, {max(ratios_lba):.4f}], "
                   f"{elapsed:.0f}s")


def test_criterion_06_constraint_safety():
    cfg0 = ScenarioConfig.defaults(master_seed=606)
    violations = []
    n_checked = 0
    for trial in range(100):
        real, rng = sample_trial_realization(cfg0, trial)
        assignment = random_group(cfg0.num_users, cfg0.num_subcarriers, rng)
        prob = build_problem(real, assignment, cfg0)
        for solver in ("cccp", "lba"):
            sol = solve_allocation(prob, solver)
            if sol.feasible:
                v = recheck_constraints(sol, prob)
                violations.extend((trial, solver, msg) for msg in v)
                n_checked += 1
    assert violations == [], violations[:5]
    _print_pass(6, f"{n_checked} feasible solutions over 100 instances pass "
                   f"the exact re-check with zero violations")


def test_criterion_07_solver_gap_trend():
    cfg = ScenarioConfig.defaults(master_seed=707)
    cccp_ets, lba_ets = [], []
    for trial in range(100):
        real, rng = sample_trial_realization(cfg, trial)
        assignment = greedy_group(real, cfg, evaluator="lba")
        prob = build_problem(real, assignment, cfg)
        cccp = solve_allocation(prob, "cccp")
        lba = solve_allocation(prob, "lba")
        cccp_ets.append(cccp.sum_et_exact if cccp.feasible else 0.0)
        lba_ets.append(lba.sum_et_exact if lba.feasible else 0.0)
    mean_cccp = float(np.mean(cccp_ets))
    mean_lba = float(np.mean(lba_ets))
    gap = (mean_cccp - mean_lba) / mean_cccp
    assert mean_cccp >= mean_lba
    assert 0.0 <= gap <= 0.10
    _print_pass(7, f"greedy grouping over 100 trials: mean CCCP {mean_cccp:.2f}"
                   f" >= mean LBA {mean_lba:.2f}, gap {gap * 100:.2f}%")


def test_criterion_08_rsma_vs_sdma():
    cfg = ScenarioConfig.defaults(master_seed=808)
    diffs = []
    for trial in range(100):
        real, rng = sample_trial_realization(cfg, trial)
        assignment = heuristic_group(real, cfg)
        rs = solve_allocation(build_problem(real, assignment, cfg, mode="rsma"),
                              "cccp")
        sd = solve_allocation(build_problem(real, assignment, cfg, mode="sdma"),
                              "cccp")
        diffs.append((rs.sum_et_exact if rs.feasible else 0.0)
                     - (sd.sum_et_exact if sd.feasible else 0.0))
    diffs = np.asarray(diffs)
    ok, p = sign_test_not_worse(diffs, tie_tol=1e-6)
    assert float(diffs.mean()) >= -1e-9
    assert ok
    losses = int(np.sum(diffs < -1e-6))
    _print_pass(8, f"100 paired trials: mean difference {diffs.mean():+.3e}, "
                   f"{losses} SDMA wins, sign test p={p:.3f} (not worse)")


def test_criterion_09_grouping_hierarchy():
    ex_list, gr_list, he_list, rn_list = [], [], [], []
    for seed in range(20):
        cfg = ScenarioConfig.defaults(
            num_users=4, num_subcarriers=2, num_antennas=8, master_seed=seed
        )
        real, rng = sample_trial_realization(cfg, 0)

        def et_of(assignment):
            sol = solve_allocation(build_problem(real, assignment, cfg), "lba")
            return sol.sum_et_exact if sol.feasible else 0.0

        best = exhaustive_group(real, cfg, evaluator="lba")
        greedy = greedy_group(real, cfg, evaluator="lba")
        heur = heuristic_group(real, cfg)
        rand = random_group(4, 2, rng)
        ex_list.append(et_of(best))
        gr_list.append(et_of(greedy))
        he_list.append(et_of(heur))
        rn_list.append(et_of(rand))
        # enumeration dominates per-instance under the same evaluator
        assert ex_list[-1] >= gr_list[-1] - 1e-9
        assert ex_list[-1] >= he_list[-1] - 1e-9
    mean_ex, mean_gr = np.mean(ex_list), np.mean(gr_list)
    mean_he, mean_rn = np.mean(he_list), np.mean(rn_list)
    assert mean_ex >= mean_gr >= mean_rn
    assert mean_gr > mean_rn
    assert mean_he > mean_rn
    _print_pass(9, f"20 instances: exhaustive {mean_ex:.2f} >= greedy "
                   f"{mean_gr:.2f} >= random {mean_rn:.2f}; heuristic "
                   f"{mean_he:.2f} > random")


def test_criterion_10_trend_suite():
    base = ScenarioConfig.defaults()
    sweeps = {
        "P_max": ([20.0, 24.0, 28.0, 30.0], +1),
        "N_th": ([200, 600, 1000], +1),
        "sigma_e2": ([0.02, 0.1, 0.2], -1),
        "M_t": ([8, 16, 32], +1),
    }
    trials = 20
    summary = []
    for param, (values, direction) in sweeps.items():
        ets = np.zeros((len(values), trials))
        for vi, value in enumerate(values):
            cfg = dataclasses.replace(
                apply_swept_parameter(base, param, value), master_seed=1010
            )
            for trial in range(trials):
                real, rng = sample_trial_realization(cfg, trial)
                assignment = heuristic_group(real, cfg)
                sol = solve_allocation(build_problem(real, assignment, cfg),
                                       "lba")
                ets[vi, trial] = sol.sum_et_exact if sol.feasible else 0.0
        for vi in range(len(values) - 1):
            diffs = direction * (ets[vi + 1] - ets[vi])
            ok, p = sign_test_improves(diffs)
            assert ok, (param, values[vi], values[vi + 1], p)
        trend = "increasing" if direction > 0 else "decreasing"
        summary.append(f"{param} {trend}")
    _print_pass(10, "; ".join(summary) + f" (sign tests over {trials} trials)")


def test_criterion_11_determinism(tmp_path):
    cfg = ScenarioConfig.defaults(master_seed=42)
    spec = SweepSpec(
        swept_parameter="P_max",
        values=[20.0, 30.0],
        methods=[MethodSpec("heuristic", "lba")],
        trials=10,
        master_seed=42,
    )
    paths1 = emit_outputs(run_sweep(cfg, spec), tmp_path / "run1")
    paths2 = emit_outputs(run_sweep(cfg, spec), tmp_path / "run2")
    bytes1 = paths1[0].read_bytes()
    bytes2 = paths2[0].read_bytes()
    assert bytes1 == bytes2
    _print_pass(11, f"smoke profile CSV byte-identical across runs "
                    f"({len(bytes1)} bytes)")
