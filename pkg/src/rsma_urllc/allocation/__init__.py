"""Joint rate-control and power-allocation layer: feasibility check,
iterative CCCP, iteration-free LBA, SDMA mode, and the brute-force oracle."""

import dataclasses

from .types import AllocationProblem, AllocationSolution, CccpState, build_problem
from .sinr import sinr_common, sinr_private, exact_et, recheck_constraints
from .lba import lba_solve, feasibility_check
from .cccp import cccp_solve
from .oracle import brute_force_allocate

__all__ = [
    "AllocationProblem",
    "AllocationSolution",
    "CccpState",
    "build_problem",
    "sinr_common",
    "sinr_private",
    "exact_et",
    "recheck_constraints",
    "lba_solve",
    "feasibility_check",
    "cccp_solve",
    "brute_force_allocate",
    "solve_allocation",
]


def solve_allocation(problem: AllocationProblem, solver: str = "cccp", **options
                     ) -> AllocationSolution:
    """Dispatch to a solver, adapting the budget mode each method assumes.

    LBA is defined on the equal power split; CCCP couples the per-subcarrier
    budgets through the total-power constraint and works in either mode.
    """
    if solver == "lba":
        if problem.power_budget_mode != "equal_split":
            problem = dataclasses.replace(problem, power_budget_mode="equal_split")
        return lba_solve(problem, **options)
    if solver == "cccp":
        return cccp_solve(problem, **options)
    raise ValueError(f"unknown solver {solver!r}")
