"""Problem/solution containers for the joint rate-control and power
allocation layer."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ..channel import ChannelRealization
from ..grouping import GroupAssignment
from ..precoding import LinkCoefficients, build_precoders, link_coefficients
from ..scenario import ScenarioConfig

__all__ = [
    "AllocationProblem",
    "AllocationSolution",
    "CccpState",
    "build_problem",
]

MODES = ("rsma", "sdma")
BUDGET_MODES = ("joint", "equal_split")


@dataclass(frozen=True)
class AllocationProblem:
    """A fixed grouping plus everything needed to allocate power and rates."""

    groups: GroupAssignment
    per_group_links: tuple            # LinkCoefficients or None per group
    config: ScenarioConfig
    mode: str = "rsma"
    power_budget_mode: str = "joint"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.power_budget_mode not in BUDGET_MODES:
            raise ValueError(f"power_budget_mode must be one of {BUDGET_MODES}")
        if self.groups.num_groups != self.config.num_subcarriers:
            raise ValueError("group count must equal the number of subcarriers")
        # subsets are allowed so grouping searches can score partial
        # assignments; full coverage is enforced at the harness entry points
        flat = [u for g in self.groups.groups for u in g]
        if len(flat) != len(set(flat)):
            raise ValueError("a user appears in more than one group")
        if flat and (min(flat) < 0 or max(flat) >= self.config.num_users):
            raise ValueError("user index out of range")
        if len(self.per_group_links) != self.groups.num_groups:
            raise ValueError("per_group_links must align with the groups")
        for g, links in zip(self.groups.groups, self.per_group_links):
            if len(g) == 0:
                if links is not None:
                    raise ValueError("empty group must carry no link coefficients")
            elif links is None or links.group_size != len(g):
                raise ValueError("link coefficients do not match group size")

    @property
    def num_groups(self) -> int:
        return self.groups.num_groups

    def active_groups(self):
        """(group index, member list, links) for nonempty groups."""
        for j, (members, links) in enumerate(
            zip(self.groups.groups, self.per_group_links)
        ):
            if members:
                yield j, list(members), links


def build_problem(
    realization: ChannelRealization,
    assignment: GroupAssignment,
    config: ScenarioConfig,
    mode: str = "rsma",
    power_budget_mode: str = "joint",
) -> AllocationProblem:
    """Construct precoders and link coefficients for every nonempty group."""
    links: List[Optional[LinkCoefficients]] = []
    for members in assignment.groups:
        if not members:
            links.append(None)
            continue
        precoders = build_precoders(realization, members, config)
        links.append(link_coefficients(realization, members, precoders, config))
    return AllocationProblem(
        groups=assignment,
        per_group_links=tuple(links),
        config=config,
        mode=mode,
        power_budget_mode=power_budget_mode,
    )


@dataclass
class AllocationSolution:
    """Powers, rates and diagnostics of one allocation solve.

    Powers are in watts; rates in bits/s/Hz.  Per-group vectors follow the
    member order of ``groups.groups[j]``.  Infeasible problems carry
    ``feasible=False`` and zero throughput by convention.
    """

    common_power: np.ndarray                 # (J,)
    private_power: List[np.ndarray]          # per group (I_j,)
    subcarrier_budgets: np.ndarray           # (J,)
    common_stream_rate: np.ndarray           # (J,)
    common_rate_shares: List[np.ndarray]     # per group (I_j,)
    private_rates: List[np.ndarray]          # per group (I_j,)
    sum_et_lower_bound: float
    sum_et_exact: float
    solver_trace: List[float] = field(default_factory=list)
    feasible: bool = True
    status: str = "optimal"
    iterations: int = 0

    @staticmethod
    def empty(num_groups: int, sizes: Sequence[int], status: str = "infeasible"
              ) -> "AllocationSolution":
        return AllocationSolution(
            common_power=np.zeros(num_groups),
            private_power=[np.zeros(s) for s in sizes],
            subcarrier_budgets=np.zeros(num_groups),
            common_stream_rate=np.zeros(num_groups),
            common_rate_shares=[np.zeros(s) for s in sizes],
            private_rates=[np.zeros(s) for s in sizes],
            sum_et_lower_bound=0.0,
            sum_et_exact=0.0,
            solver_trace=[],
            feasible=False,
            status=status,
        )

    def to_json(self, path=None) -> str:
        data = {
            "common_power": self.common_power.tolist(),
            "private_power": [p.tolist() for p in self.private_power],
            "subcarrier_budgets": self.subcarrier_budgets.tolist(),
            "common_stream_rate": self.common_stream_rate.tolist(),
            "common_rate_shares": [r.tolist() for r in self.common_rate_shares],
            "private_rates": [r.tolist() for r in self.private_rates],
            "sum_et_lower_bound": self.sum_et_lower_bound,
            "sum_et_exact": self.sum_et_exact,
            "solver_trace": list(self.solver_trace),
            "feasible": self.feasible,
            "status": self.status,
            "iterations": self.iterations,
        }
        text = json.dumps(data)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @staticmethod
    def from_json(text_or_path) -> "AllocationSolution":
        if isinstance(text_or_path, str) and text_or_path.lstrip().startswith("{"):
            data = json.loads(text_or_path)
        else:
            with open(text_or_path) as fh:
                data = json.load(fh)
        return AllocationSolution(
            common_power=np.asarray(data["common_power"], dtype=float),
            private_power=[np.asarray(p, dtype=float) for p in data["private_power"]],
            subcarrier_budgets=np.asarray(data["subcarrier_budgets"], dtype=float),
            common_stream_rate=np.asarray(data["common_stream_rate"], dtype=float),
            common_rate_shares=[np.asarray(r, dtype=float) for r in data["common_rate_shares"]],
            private_rates=[np.asarray(r, dtype=float) for r in data["private_rates"]],
            sum_et_lower_bound=float(data["sum_et_lower_bound"]),
            sum_et_exact=float(data["sum_et_exact"]),
            solver_trace=list(data["solver_trace"]),
            feasible=bool(data["feasible"]),
            status=str(data["status"]),
            iterations=int(data["iterations"]),
        )


@dataclass
class CccpState:
    """Linearization point of one CCCP iteration (powers in watts)."""

    iteration: int
    lam: List[np.ndarray]            # per group common-SINR slacks, >= 0
    mu: List[np.ndarray]             # per group private-SINR slacks, >= 0
    private_power: List[np.ndarray]  # per group (I_j,)
    common_power: np.ndarray         # (J,)
    previous_objective: float = -math.inf
