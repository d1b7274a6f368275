"""Scene construction: from a logical trajectory to a placed environment.

The build walks the generation chain: ask the provider for a floor plan,
then for objects (bounding boxes come from the asset catalog), then for
spatial relations. Proposed relations pass through deterministic
compatibility rules; conflicts go back to the provider for revision, a
bounded number of rounds. The surviving draft is encoded as a CSP and
solved with relaxation; the placed result carries derived metadata and is
checked against the trajectory's query conditions before it is returned.

Failures keep their causes apart: UnsatisfiableScene means geometry or
relation sets that cannot be realized, TrajectoryMismatch means the scene
is physically fine but does not realize the requested decision logic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .assets import AssetCatalog, retrieve_asset
from .environment import (
    CONTACT_KINDS,
    Doorway,
    EnvironmentSpec,
    ObjectSpec,
    RELATION_KINDS,
    RELATIVE_KINDS,
    Room,
    SpatialRelation,
    Window,
    make_room,
    rebuild_metadata,
)
from .errors import CoreUnsat, SchemaViolation, TrajectoryMismatch, UnsatisfiableScene
from .providers import SceneProvider
from .schema import TaskSchema, unmet_conditions
from .solver import SolverConfig, encode, solve_with_relaxation
from .trajectories import LogicalTrajectory


@dataclass
class BuildOutcome:
    environment: EnvironmentSpec
    solver_stats: dict = field(default_factory=dict)
    revision_rounds: int = 0


# ---------------------------------------------------------------------------
# response parsing
# ---------------------------------------------------------------------------


def parse_floor_plan(doc: dict) -> tuple[list[Room], list[Doorway], list[Window]]:
    rooms = []
    for i, raw in enumerate(doc.get("rooms", [])):
        for key in ("id", "x_min", "z_min", "x_max", "z_max"):
            if key not in raw:
                raise SchemaViolation(f"rooms[{i}] is missing {key!r}")
        styles = {
            key: str(raw[key])
            for key in ("floor_color", "floor_material", "wall_color", "wall_material")
            if key in raw
        }
        rooms.append(
            make_room(
                raw["id"],
                float(raw["x_min"]),
                float(raw["z_min"]),
                float(raw["x_max"]),
                float(raw["z_max"]),
                **styles,
            )
        )
    doorways = []
    for i, raw in enumerate(doc.get("doorways", [])):
        for key in ("id", "connects", "width", "height"):
            if key not in raw:
                raise SchemaViolation(f"doorways[{i}] is missing {key!r}")
        connects = tuple(raw["connects"])
        if len(connects) != 2:
            raise SchemaViolation(f"doorways[{i}] must connect exactly two sides")
        doorways.append(
            Doorway(
                id=raw["id"],
                connects=connects,
                width=float(raw["width"]),
                height=float(raw["height"]),
            )
        )
    windows = []
    for i, raw in enumerate(doc.get("windows", [])):
        for key in ("id", "room", "orientation", "width", "height", "sill_height"):
            if key not in raw:
                raise SchemaViolation(f"windows[{i}] is missing {key!r}")
        windows.append(
            Window(
                id=raw["id"],
                room=raw["room"],
                orientation=raw["orientation"],
                width=float(raw["width"]),
                height=float(raw["height"]),
                sill_height=float(raw["sill_height"]),
            )
        )
    if not rooms:
        raise SchemaViolation("floor plan has no rooms")
    return rooms, doorways, windows


def resolve_objects(raw_objects: list[dict], catalog: AssetCatalog) -> list[ObjectSpec]:
    """Fill bounding boxes from the catalog; keep provider order."""
    out = []
    for raw in raw_objects:
        asset = retrieve_asset(catalog, raw["description"])
        attributes = {str(k): str(v) for k, v in raw.get("attributes", {}).items()}
        out.append(
            ObjectSpec(
                id=raw["id"],
                description=raw["description"],
                room=raw["room"],
                size=asset.size,
                category=raw["category"],
                attributes=attributes,
            )
        )
    return out


def parse_relations(raw_relations: list[dict], objects: list[ObjectSpec]) -> list[SpatialRelation]:
    """Relations from provider output; priority defaults to the subject's category."""
    category = {o.id: o.category for o in objects}
    out = []
    for i, raw in enumerate(raw_relations):
        kind = raw["kind"]
        if kind not in RELATION_KINDS:
            raise SchemaViolation(f"relations[{i}] has unknown kind {kind!r}")
        priority = raw.get("priority")
        if priority is None:
            subject_cat = category.get(raw["subject"], "enrichment")
            priority = "task" if subject_cat == "task_related" else "enrichment"
        out.append(
            SpatialRelation(
                kind=kind,
                subject=raw["subject"],
                reference=raw.get("reference"),
                priority=priority,
            )
        )
    return out


# ---------------------------------------------------------------------------
# compatibility rules
# ---------------------------------------------------------------------------


def _fits_inside(inner: ObjectSpec, outer: ObjectSpec, eps: float) -> bool:
    sx, sy, sz = inner.size
    cx, cy, cz = outer.size
    if sy > cy + eps:
        return False
    return (sx <= cx + eps and sz <= cz + eps) or (sz <= cx + eps and sx <= cz + eps)


def compatibility_conflicts(objects: list[ObjectSpec], relations: list[SpatialRelation], wall_height: float = 3.0, mount_height: float = 1.4, eps: float = 0.01) -> list[dict]:
    """Deterministic pre-solver checks on a proposed relation set.

    Returns conflict records: {"rule", "relations": [indices], "message"}.
    """
    by_id = {o.id: o for o in objects}
    conflicts: list[dict] = []

    def conflict(rule: str, indices: list[int], message: str) -> None:
        conflicts.append({"rule": rule, "relations": indices, "message": message})

    for i, rel in enumerate(relations):
        missing = [e for e in (rel.subject, rel.reference) if e is not None and e not in by_id]
        if missing:
            conflict("unknown_entity", [i], f"relation {i} names unknown objects {missing}")

    support_claims: dict[str, list[int]] = {}
    for i, rel in enumerate(relations):
        if rel.kind in CONTACT_KINDS or rel.kind == "mounted_on_wall":
            support_claims.setdefault(rel.subject, []).append(i)
    for subject, indices in support_claims.items():
        if len(indices) > 1:
            kinds = [relations[i].kind for i in indices]
            conflict(
                "exclusive_support",
                indices,
                f"object {subject!r} has {len(indices)} support claims: {kinds}",
            )

    edges = {}
    for i, rel in enumerate(relations):
        if rel.kind in CONTACT_KINDS and rel.reference in by_id and rel.subject in by_id:
            edges[rel.subject] = (rel.reference, i)
    for start in edges:
        seen = {start}
        node = start
        trail = []
        while node in edges:
            node, idx = edges[node]
            trail.append(idx)
            if node in seen:
                conflict("support_cycle", sorted(set(trail)), f"support chain through {start!r} loops")
                break
            seen.add(node)

    for i, rel in enumerate(relations):
        if rel.kind != "in" or rel.subject not in by_id or rel.reference not in by_id:
            continue
        if not _fits_inside(by_id[rel.subject], by_id[rel.reference], eps):
            conflict(
                "containment_capacity",
                [i],
                f"object {rel.subject!r} does not fit inside {rel.reference!r} in any rotation",
            )

    for i, rel in enumerate(relations):
        if rel.kind != "mounted_on_wall" or rel.subject not in by_id:
            continue
        obj = by_id[rel.subject]
        height = float(obj.attributes.get("mount_height", mount_height))
        if height + obj.size[1] > wall_height + eps:
            conflict(
                "mountability",
                [i],
                f"object {rel.subject!r} mounted at {height} m would poke through the wall top",
            )

    for i, rel in enumerate(relations):
        if rel.reference is None or rel.subject not in by_id or rel.reference not in by_id:
            continue
        if rel.kind in CONTACT_KINDS or rel.kind in RELATIVE_KINDS:
            a, b = by_id[rel.subject], by_id[rel.reference]
            if a.room != b.room:
                conflict(
                    "room_consistency",
                    [i],
                    f"{rel.kind} needs {rel.subject!r} and {rel.reference!r} in one room, "
                    f"got {a.room!r} and {b.room!r}",
                )
    return conflicts


# ---------------------------------------------------------------------------
# build
# ---------------------------------------------------------------------------


def _serialize_relations(relations: list[SpatialRelation]) -> list[dict]:
    out = []
    for rel in relations:
        item = {"kind": rel.kind, "subject": rel.subject, "priority": rel.priority}
        if rel.reference is not None:
            item["reference"] = rel.reference
        out.append(item)
    return out


def build_environment(
    provider: SceneProvider,
    catalog: AssetCatalog,
    schema: TaskSchema,
    trajectory: LogicalTrajectory,
    env_id: str,
    config: SolverConfig | None = None,
    max_revisions: int = 3,
) -> BuildOutcome:
    config = config or SolverConfig()
    task_id = schema.task_id
    trajectory_id = trajectory.trajectory_id

    plan_doc = provider.design_floor_plan(task_id, trajectory_id)
    rooms, doorways, windows = parse_floor_plan(plan_doc)

    raw_objects = provider.select_objects(task_id, trajectory_id, [r.id for r in rooms])
    objects = resolve_objects(raw_objects, catalog)

    raw_relations = provider.propose_relations(task_id, trajectory_id, raw_objects)
    relations = parse_relations(raw_relations, objects)

    rounds = 0
    sem = config.semantics
    conflicts = compatibility_conflicts(
        objects, relations, wall_height=sem.wall_height, mount_height=sem.mount_height
    )
    while conflicts and rounds < max_revisions:
        rounds += 1
        raw_relations = provider.revise_relations(
            task_id, trajectory_id, _serialize_relations(relations), conflicts
        )
        relations = parse_relations(raw_relations, objects)
        conflicts = compatibility_conflicts(
            objects, relations, wall_height=sem.wall_height, mount_height=sem.mount_height
        )
    if conflicts:
        summary = "; ".join(c["message"] for c in conflicts)
        raise UnsatisfiableScene(
            f"relation set for {trajectory_id!r} stayed incompatible after "
            f"{rounds} revision rounds: {summary}"
        )

    problem = encode(rooms, doorways, windows, objects, relations, config)
    try:
        solution = solve_with_relaxation(problem)
    except CoreUnsat as exc:
        raise UnsatisfiableScene(
            f"no placement satisfies the core relations for {trajectory_id!r}: {exc}"
        ) from exc

    relation_index_of = {c.id: c.relation_index for c in problem.constraints}
    relaxed = sorted(
        relation_index_of[cid] for cid in solution.relaxed if relation_index_of[cid] is not None
    )

    placed_doorways = [
        Doorway(
            id=d.id,
            connects=d.connects,
            width=d.width,
            height=d.height,
            position=solution.door_positions[d.id],
        )
        for d in doorways
    ]
    placed_windows = [
        Window(
            id=w.id,
            room=w.room,
            orientation=w.orientation,
            width=w.width,
            height=w.height,
            sill_height=w.sill_height,
            position=solution.window_positions[w.id],
        )
        for w in windows
    ]

    env = EnvironmentSpec(
        id=env_id,
        task_id=task_id,
        trajectory_id=trajectory_id,
        rooms=rooms,
        doorways=placed_doorways,
        windows=placed_windows,
        objects=objects,
        relations=relations,
        placements=solution.placements,
        relaxed_relations=relaxed,
        tracked_entities=sorted(schema.tracked_entities),
    )
    env.metadata = rebuild_metadata(env, sem)
    env.validate()

    failures = unmet_conditions(schema, trajectory, env.metadata)
    if failures:
        raise TrajectoryMismatch(
            f"environment {env_id!r} does not realize {trajectory_id!r}:\n  "
            + "\n  ".join(failures)
        )
    return BuildOutcome(
        environment=env,
        solver_stats=dict(solution.stats),
        revision_rounds=rounds,
    )
