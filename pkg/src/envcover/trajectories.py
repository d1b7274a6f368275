"""Logical trajectories and minimal covering-set selection.

A logical trajectory picks one decision path per subtask; the full space is
the cartesian product of the per-subtask path sets. Building a scene per
trajectory is expensive, so the selection pass below keeps a small subset
whose paths still cover every path in the universe.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product

from .errors import EmptyPathSet, InstanceTooLarge
from .task_model import BehaviorPlanTree, DecisionPath, QueryResponse, extract_paths


@dataclass(frozen=True)
class LogicalTrajectory:
    """One decision path per subtask, in subtask order."""

    paths: tuple[DecisionPath, ...]

    def __post_init__(self):
        if not self.paths:
            raise EmptyPathSet("a trajectory needs at least one path")

    @property
    def trajectory_id(self) -> str:
        return "|".join(p.path_id for p in self.paths)


def paths_per_subtask(trees: list[BehaviorPlanTree]) -> list[list[DecisionPath]]:
    return [extract_paths(tree) for tree in trees]


def cartesian_trajectories(path_sets) -> list[LogicalTrajectory]:
    """Every combination of one path per subtask, in lexicographic order.

    Lexicographic means the first subtask's path index varies slowest and
    the last subtask's fastest, with path indices in tree declaration order.
    """
    path_sets = [list(ps) for ps in path_sets]
    for i, ps in enumerate(path_sets):
        if not ps:
            raise EmptyPathSet(f"subtask at position {i} has no decision paths")
    return [LogicalTrajectory(paths=combo) for combo in product(*path_sets)]


def split_constraints(trajectory: LogicalTrajectory) -> frozenset[str]:
    """The trajectory's constraint set: the path ids it commits to."""
    return frozenset(p.path_id for p in trajectory.paths)


def minimal_trajectory_selection(trajectories) -> list[LogicalTrajectory]:
    """Greedy covering-subset selection in a single pass plus a cleanup pass.

    Main pass: a trajectory whose constraints are fully disjoint from the
    covered pool is taken immediately; one that is only partially novel is
    parked as a candidate; one contributing nothing is dropped. Cleanup pass:
    each round takes the candidate covering the most still-uncovered
    constraints (first-seen order breaks ties) until no candidate contributes.
    On a full cartesian product this yields exactly max path-set size picks,
    matching the exhaustive oracle's cardinality. Output order is selection
    order, and the result covers exactly the union of the input constraints.
    """
    selected: list[LogicalTrajectory] = []
    pool: set[str] = set()
    candidates: list[tuple[LogicalTrajectory, frozenset[str]]] = []
    for trajectory in trajectories:
        cset = split_constraints(trajectory)
        if pool.isdisjoint(cset):
            selected.append(trajectory)
            pool |= cset
        elif not cset <= pool:
            candidates.append((trajectory, cset))
    while candidates:
        best_idx = -1
        best_gain = 0
        for i, (_, cset) in enumerate(candidates):
            gain = len(cset - pool)
            if gain > best_gain:
                best_idx, best_gain = i, gain
        if best_idx < 0:
            break
        trajectory, cset = candidates.pop(best_idx)
        selected.append(trajectory)
        pool |= cset
        candidates = [(t, c) for t, c in candidates if not c <= pool]
    return selected


def covered_constraints(trajectories) -> set[str]:
    out: set[str] = set()
    for trajectory in trajectories:
        out |= split_constraints(trajectory)
    return out


def exhaustive_min_cover(trajectories, max_size: int = 20) -> list[LogicalTrajectory]:
    """Smallest subset covering the union of constraints, by brute force.

    Checks subsets in increasing size and, within a size, in lexicographic
    index order, so ties resolve to the lexicographically smallest index set.
    O(2^N); refuses inputs above ``max_size``. Kept deliberately independent
    of minimal_trajectory_selection so the two can cross-check each other.
    """
    trajectories = list(trajectories)
    if len(trajectories) > max_size:
        raise InstanceTooLarge(
            f"{len(trajectories)} trajectories exceeds the exhaustive bound of {max_size}"
        )
    universe = covered_constraints(trajectories)
    if not universe:
        return []
    csets = [split_constraints(t) for t in trajectories]
    for size in range(1, len(trajectories) + 1):
        for idxs in combinations(range(len(trajectories)), size):
            union: set[str] = set()
            for i in idxs:
                union |= csets[i]
            if union == universe:
                return [trajectories[i] for i in idxs]
    return trajectories  # unreachable: the full set always covers its own union


def jaccard_index(a, b) -> float:
    """|A ∩ B| / |A ∪ B| over trajectory-id sets; 1.0 when both are empty."""
    a, b = set(a), set(b)
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def serialize_trajectory(trajectory: LogicalTrajectory) -> dict:
    return {
        "trajectory_id": trajectory.trajectory_id,
        "paths": [
            {
                "subtask_id": p.subtask_id,
                "steps": [{"query": s.query, "response": s.response} for s in p.steps],
                "leaf_action": p.leaf_action,
            }
            for p in trajectory.paths
        ],
    }


def deserialize_trajectory(doc: dict) -> LogicalTrajectory:
    paths = tuple(
        DecisionPath(
            subtask_id=raw["subtask_id"],
            steps=tuple(
                QueryResponse(query=s["query"], response=s["response"])
                for s in raw["steps"]
            ),
            leaf_action=raw["leaf_action"],
        )
        for raw in doc["paths"]
    )
    return LogicalTrajectory(paths=paths)
