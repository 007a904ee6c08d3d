"""Command-line entry points.

``run`` executes a Monte-Carlo sweep and writes CSV/SVG outputs;
``validate-lemma1`` runs the numeric lower-bound validation grid;
``oracle`` compares both convex solvers against the brute-force power grid
on a small single-carrier instance.  Exit code 0 means every solve either
succeeded or was correctly flagged infeasible.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .allocation import (
    brute_force_allocate,
    build_problem,
    solve_allocation,
)
from .channel import sample_channels, sample_positions
from .fbl import validate_lemma1
from .grouping import GroupAssignment
from .harness import MethodSpec, SweepSpec, emit_outputs, run_sweep
from .scenario import ScenarioConfig, derive_rng_stream


def _cmd_run(args) -> int:
    config = ScenarioConfig.from_json(args.config)
    spec = SweepSpec.from_json(args.sweep)
    if args.trials is not None:
        spec = dataclasses.replace(spec, trials=args.trials)
    if args.seed is not None:
        spec = dataclasses.replace(spec, master_seed=args.seed)
    if args.methods:
        methods = [MethodSpec.parse(m) for m in args.methods.split(",")]
        spec = dataclasses.replace(spec, methods=methods)
    result = run_sweep(config, spec, verbose=not args.quiet)
    paths = emit_outputs(result, args.out)
    for p in paths:
        print(f"wrote {p}")
    n_fail = sum(r.status == "numerical_failure" for r in result.records)
    n_inf = sum(not r.feasible for r in result.records)
    print(f"{len(result.records)} trials, {n_inf} infeasible, {n_fail} failures")
    return 1 if result.any_failures else 0


def _cmd_validate_lemma1(args) -> int:
    config = ScenarioConfig.from_json(args.config) if args.config else \
        ScenarioConfig.defaults()
    report = validate_lemma1(
        gamma_grid=[0.1, 1.0, 10.0, 100.0, 1000.0],
        eps_grid=[1e-4, min(config.error_threshold, 1e-4), 1e-6],
        blocklength_grid=[100, config.blocklength_per_subcarrier, 10000],
    )
    for point, mono, holds, gap in zip(
        report.points, report.monotone, report.bound_holds, report.gaps
    ):
        status = "ok" if (mono and holds) else "VIOLATION"
        print(
            f"gamma={point[0]:<8g} eps={point[1]:<8g} N={point[2]:<6g} "
            f"monotone={mono} bound_holds={holds} gap={gap:.3e} [{status}]"
        )
    if report.ok:
        print("lemma validation passed on all grid points")
        return 0
    for v in report.violations:
        print("violation:", v)
    return 1


def _cmd_oracle(args) -> int:
    config = ScenarioConfig.defaults(
        num_users=2, num_subcarriers=1, num_antennas=4,
        master_seed=args.seed if args.seed is not None else 0,
    )
    if args.config:
        config = ScenarioConfig.from_json(args.config)
    rng = derive_rng_stream(config, 0)
    realization = sample_channels(config, sample_positions(config, rng), rng)
    assignment = GroupAssignment((tuple(range(config.num_users)),))
    problem = build_problem(realization, assignment, config)
    oracle = brute_force_allocate(problem, grid_points_per_dim=args.grid)
    cccp = solve_allocation(problem, solver="cccp")
    lba = solve_allocation(problem, solver="lba")
    print(f"oracle (grid {args.grid}^dims): {oracle.sum_et_lower_bound:.6f}")
    print(
        f"cccp:  {cccp.sum_et_lower_bound:.6f} "
        f"({cccp.sum_et_lower_bound / max(oracle.sum_et_lower_bound, 1e-12):.4f} "
        f"of oracle, {cccp.iterations} iterations)"
    )
    print(
        f"lba:   {lba.sum_et_lower_bound:.6f} "
        f"({lba.sum_et_lower_bound / max(oracle.sum_et_lower_bound, 1e-12):.4f} "
        f"of oracle)"
    )
    ok = (
        cccp.status in ("optimal", "max_iters")
        and lba.status in ("optimal", "infeasible")
    )
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rsma-urllc",
        description="Multi-carrier RSMA URLLC resource-allocation simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a Monte-Carlo sweep")
    p_run.add_argument("--config", required=True, help="scenario JSON file")
    p_run.add_argument("--sweep", required=True, help="sweep spec JSON file")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--trials", type=int, default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument(
        "--methods", default=None,
        help="comma-separated grouping+solver[+mode] triples",
    )
    p_run.add_argument("--quiet", action="store_true")
    p_run.set_defaults(func=_cmd_run)

    p_val = sub.add_parser("validate-lemma1", help="numeric lemma validation")
    p_val.add_argument("--config", default=None)
    p_val.set_defaults(func=_cmd_validate_lemma1)

    p_or = sub.add_parser("oracle", help="brute-force comparison")
    p_or.add_argument("--grid", type=int, default=60)
    p_or.add_argument("--config", default=None)
    p_or.add_argument("--seed", type=int, default=None)
    p_or.set_defaults(func=_cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
