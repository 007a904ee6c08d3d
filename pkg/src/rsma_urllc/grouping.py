"""User-to-subcarrier grouping strategies: greedy search, correlation
heuristic, random baseline, and the exhaustive oracle for tiny instances.

The greedy and exhaustive strategies score candidate assignments by solving
the allocation problem (LBA by default; CCCP available); the heuristic is
allocation-free by design and only inspects channel correlations.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from .channel import ChannelRealization, correlation
from .scenario import ScenarioConfig

__all__ = [
    "GroupAssignment",
    "greedy_group",
    "heuristic_group",
    "random_group",
    "exhaustive_group",
]


@dataclass(frozen=True)
class GroupAssignment:
    """Partition of the user indices {0..K-1} into J (possibly empty) groups."""

    groups: tuple

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(tuple(g) for g in self.groups))
        flat = [u for g in self.groups for u in g]
        if len(flat) != len(set(flat)):
            raise ValueError("groups must be disjoint")

    @property
    def num_groups(self) -> int:
        return len(self.groups)

    @property
    def sizes(self) -> List[int]:
        return [len(g) for g in self.groups]

    @property
    def num_users(self) -> int:
        return sum(self.sizes)

    def validate_partition(self, num_users: int):
        flat = sorted(u for g in self.groups for u in g)
        if flat != list(range(num_users)):
            raise ValueError("assignment is not a partition of the user set")

    def to_json(self) -> str:
        return json.dumps([list(g) for g in self.groups])

    @staticmethod
    def from_json(text: str) -> "GroupAssignment":
        return GroupAssignment(tuple(tuple(g) for g in json.loads(text)))


def _default_evaluator(
    realization: ChannelRealization,
    config: ScenarioConfig,
    evaluator: str,
) -> Callable[[GroupAssignment], float]:
    """Score an assignment by the exact effective throughput its allocation
    achieves (0 when infeasible)."""
    from .allocation import build_problem, solve_allocation

    solver = evaluator
    if solver not in ("lba", "cccp"):
        raise ValueError("evaluator must be 'lba' or 'cccp'")

    def score(assignment: GroupAssignment) -> float:
        try:
            problem = build_problem(realization, assignment, config)
            solution = solve_allocation(problem, solver=solver)
        except Exception:
            return 0.0
        if not solution.feasible:
            return 0.0
        return solution.sum_et_exact

    return score


def greedy_group(
    realization: ChannelRealization,
    config: ScenarioConfig,
    evaluator: str = "lba",
    score_fn: Optional[Callable[[GroupAssignment], float]] = None,
) -> GroupAssignment:
    """Place users one at a time on the subcarrier that maximizes the
    evaluated throughput of the partial assignment (J*K evaluator calls,
    lowest group index wins ties)."""
    k_users = config.num_users
    j_groups = config.num_subcarriers
    score = score_fn or _default_evaluator(realization, config, evaluator)
    groups: List[List[int]] = [[] for _ in range(j_groups)]
    for user in range(k_users):
        best_j, best_val = 0, -math.inf
        for j in range(j_groups):
            candidate = [list(g) for g in groups]
            candidate[j].append(user)
            val = score(GroupAssignment(tuple(tuple(g) for g in candidate)))
            if val > best_val + 1e-12:
                best_j, best_val = j, val
        groups[best_j].append(user)
    return GroupAssignment(tuple(tuple(g) for g in groups))


def _balanced_sizes(k_users: int, j_groups: int, literal_rule: bool) -> List[int]:
    base = k_users // j_groups
    r = k_users % j_groups
    if not literal_rule:
        # first r groups take one extra user
        return [base + (1 if j < r else 0) for j in range(j_groups)]
    # literal published rule: extra user when r <= j (1-based); degenerates
    # for r = 0, retained only for comparison
    return [base + (0 if r > (j + 1) else 1) for j in range(j_groups)]


def _grow_groups(order_norm, corr, sizes, threshold):
    """Greedy construction of groups 1..J-1 under a correlation cap.

    Returns the groups (list of lists) or None when some group cannot reach
    its target size with pairwise correlations <= threshold.
    """
    j_groups = len(sizes)
    unscheduled = list(order_norm)
    groups = []
    for j in range(j_groups - 1):
        target = sizes[j]
        group: List[int] = []
        if target == 0:
            groups.append(group)
            continue
        seed = unscheduled[0]  # largest estimated channel norm first
        group.append(seed)
        unscheduled.remove(seed)
        while len(group) < target:
            best_user, best_max = None, np.inf
            for u in unscheduled:
                max_corr = max(corr[u, v] for v in group)
                if max_corr < best_max:
                    best_user, best_max = u, max_corr
            if best_user is None or best_max > threshold:
                return None
            group.append(best_user)
            unscheduled.remove(best_user)
        groups.append(group)
    groups.append(list(unscheduled))
    return groups


def heuristic_group(
    realization: ChannelRealization,
    config: ScenarioConfig,
) -> GroupAssignment:
    """Correlation-threshold grouping with balanced sizes.

    Users with low pairwise correlation of their estimated channels end up
    on the same subcarrier; the threshold is the smallest correlation value
    (found by bisection over the sorted unique values) at which every group
    before the last can be filled to its balanced size.  No allocation
    solves are performed.
    """
    k_users = config.num_users
    j_groups = config.num_subcarriers
    sizes = _balanced_sizes(k_users, j_groups, config.literal_balance_rule)
    if j_groups == 1:
        return GroupAssignment((tuple(range(k_users)),))

    est = realization.est_small_scale
    corr = np.zeros((k_users, k_users))
    for a in range(k_users):
        for b in range(a + 1, k_users):
            corr[a, b] = corr[b, a] = correlation(est[a], est[b])
    # diagonal forced to zero so a user never blocks itself
    norms = np.linalg.norm(est, axis=1)
    order_norm = sorted(range(k_users), key=lambda u: -norms[u])

    candidates = sorted(set(corr[np.triu_indices(k_users, 1)]) | {1.0})
    lo, hi = 0, len(candidates) - 1
    # construction succeeds monotonically in the threshold; find the smallest
    # workable one
    best = _grow_groups(order_norm, corr, sizes, candidates[hi])
    if best is None:
        raise RuntimeError("grouping failed even at threshold 1.0")
    while lo < hi:
        mid = (lo + hi) // 2
        attempt = _grow_groups(order_norm, corr, sizes, candidates[mid])
        if attempt is not None:
            best, hi = attempt, mid
        else:
            lo = mid + 1
    return GroupAssignment(tuple(tuple(sorted(g)) for g in best))


def random_group(
    k_users: int, j_groups: int, rng: np.random.Generator
) -> GroupAssignment:
    """Each user lands on an independently uniform subcarrier."""
    draws = rng.integers(0, j_groups, size=k_users)
    groups = [[] for _ in range(j_groups)]
    for user, j in enumerate(draws):
        groups[int(j)].append(user)
    return GroupAssignment(tuple(tuple(g) for g in groups))


def exhaustive_group(
    realization: ChannelRealization,
    config: ScenarioConfig,
    evaluator: str = "lba",
    score_fn: Optional[Callable[[GroupAssignment], float]] = None,
) -> GroupAssignment:
    """Enumerate all J^K assignments and keep the best (guarded to 2^16)."""
    k_users = config.num_users
    j_groups = config.num_subcarriers
    if j_groups ** k_users > 2 ** 16:
        raise ValueError(f"exhaustive search over {j_groups}^{k_users} assignments refused")
    score = score_fn or _default_evaluator(realization, config, evaluator)
    best_assignment, best_val = None, -math.inf
    for labels in itertools.product(range(j_groups), repeat=k_users):
        groups = [[] for _ in range(j_groups)]
        for user, j in enumerate(labels):
            groups[j].append(user)
        assignment = GroupAssignment(tuple(tuple(g) for g in groups))
        val = score(assignment)
        if val > best_val + 1e-12:
            best_assignment, best_val = assignment, val
    return best_assignment
