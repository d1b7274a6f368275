"""Environment data model: rooms, openings, objects, relations, placements.

An EnvironmentSpec is a fully explicit scene: axis-aligned rectangular rooms
in the x-z plane, doorways and windows with solved positions, objects with
bounding boxes and solved placements, the spatial relations the layout was
solved under, and a metadata map regenerated from the geometry. Serialization
is canonical (sorted keys, fixed float rounding) so identical scenes are
byte-identical on disk.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import SchemaViolation
from .semantics import CARDINALS, DEFAULT_SEMANTICS, RelationSemantics

SCHEMA_VERSION = 1

UNARY_KINDS = frozenset({"edge", "center", "mounted_on_wall"})
CONTACT_KINDS = frozenset({"in", "on_top_of"})
DISTANCE_KINDS = frozenset({"near", "far"})
RELATIVE_KINDS = frozenset({"above", "in_front_of", "side_of", "center_aligned", "face_to"})
RELATION_KINDS = UNARY_KINDS | CONTACT_KINDS | DISTANCE_KINDS | RELATIVE_KINDS

PRIORITIES = ("task", "enrichment")
CATEGORIES = ("task_related", "enrichment")


def _round(v: float) -> float:
    return round(float(v), 6)


# ---------------------------------------------------------------------------
# parts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Room:
    id: str
    vertices: tuple[tuple[float, float], ...]  # 4 corners (x, z)
    floor_color: str = ""
    floor_material: str = ""
    wall_color: str = ""
    wall_material: str = ""

    @property
    def x_min(self) -> float:
        return min(v[0] for v in self.vertices)

    @property
    def x_max(self) -> float:
        return max(v[0] for v in self.vertices)

    @property
    def z_min(self) -> float:
        return min(v[1] for v in self.vertices)

    @property
    def z_max(self) -> float:
        return max(v[1] for v in self.vertices)

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x_min + self.x_max) / 2, (self.z_min + self.z_max) / 2)

    def validate(self) -> None:
        if len(self.vertices) != 4:
            raise SchemaViolation("room must have 4 vertices", f"rooms[{self.id}]")
        xs = {_round(v[0]) for v in self.vertices}
        zs = {_round(v[1]) for v in self.vertices}
        if len(xs) != 2 or len(zs) != 2:
            raise SchemaViolation(
                "room vertices must form an axis-aligned rectangle", f"rooms[{self.id}]"
            )
        if self.x_max - self.x_min <= 0 or self.z_max - self.z_min <= 0:
            raise SchemaViolation("room must have positive area", f"rooms[{self.id}]")


def make_room(id: str, x_min: float, z_min: float, x_max: float, z_max: float, **styles) -> Room:
    return Room(
        id=id,
        vertices=((x_min, z_min), (x_max, z_min), (x_max, z_max), (x_min, z_max)),
        **styles,
    )


@dataclass(frozen=True)
class Doorway:
    id: str
    connects: tuple[str, str]  # room ids; "exterior" allowed on one side
    width: float
    height: float
    position: tuple[float, float] | None = None  # solved center (x, z) on the wall


@dataclass(frozen=True)
class Window:
    id: str
    room: str
    orientation: str  # which wall: north/south/east/west
    width: float
    height: float
    sill_height: float
    position: tuple[float, float] | None = None  # solved center (x, z) on the wall


@dataclass(frozen=True)
class ObjectSpec:
    id: str
    description: str
    room: str
    size: tuple[float, float, float]  # extents along x, y, z before rotation
    category: str  # task_related | enrichment
    attributes: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SpatialRelation:
    kind: str
    subject: str
    reference: str | None = None
    priority: str = "task"

    def validate(self) -> None:
        where = f"relations[{self.kind} {self.subject}]"
        if self.kind not in RELATION_KINDS:
            raise SchemaViolation(f"unknown relation kind {self.kind!r}", where)
        if self.priority not in PRIORITIES:
            raise SchemaViolation(f"unknown priority {self.priority!r}", where)
        if self.kind in UNARY_KINDS:
            if self.reference is not None:
                raise SchemaViolation("unary relation takes no reference", where)
        elif self.reference is None:
            raise SchemaViolation("binary relation needs a reference", where)
        elif self.reference == self.subject:
            raise SchemaViolation("relation cannot reference its own subject", where)


@dataclass(frozen=True)
class Placement:
    object: str
    position: tuple[float, float, float]  # footprint center x, bottom face y, center z
    direction: str

    def validate(self) -> None:
        if self.direction not in CARDINALS:
            raise SchemaViolation(
                f"direction must be one of {CARDINALS}", f"placements[{self.object}]"
            )


def footprint(size, direction: str) -> tuple[float, float]:
    """Horizontal extents (x, z) after rotating to the given cardinal."""
    sx, _, sz = size
    if direction in ("east", "west"):
        return sz, sx
    return sx, sz


def placed_box(obj: ObjectSpec, placement: Placement):
    """World-space AABB (x0, y0, z0, x1, y1, z1) for a placed object."""
    fx, fz = footprint(obj.size, placement.direction)
    x, y, z = placement.position
    return (x - fx / 2, y, z - fz / 2, x + fx / 2, y + obj.size[1], z + fz / 2)


# ---------------------------------------------------------------------------
# the environment
# ---------------------------------------------------------------------------


@dataclass
class EnvironmentSpec:
    id: str
    task_id: str
    trajectory_id: str
    rooms: list[Room]
    doorways: list[Doorway] = field(default_factory=list)
    windows: list[Window] = field(default_factory=list)
    objects: list[ObjectSpec] = field(default_factory=list)
    relations: list[SpatialRelation] = field(default_factory=list)
    placements: list[Placement] = field(default_factory=list)
    relaxed_relations: list[int] = field(default_factory=list)
    tracked_entities: list[str] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)  # (entity, attribute) -> value

    def room_by_id(self, room_id: str) -> Room:
        for room in self.rooms:
            if room.id == room_id:
                return room
        raise KeyError(room_id)

    def object_by_id(self, object_id: str) -> ObjectSpec:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        raise KeyError(object_id)

    def placement_of(self, object_id: str) -> Placement:
        for p in self.placements:
            if p.object == object_id:
                return p
        raise KeyError(object_id)

    def validate(self) -> None:
        """Structural and cross-reference checks; raises SchemaViolation."""
        room_ids = [r.id for r in self.rooms]
        if len(set(room_ids)) != len(room_ids):
            raise SchemaViolation("duplicate room ids", "rooms")
        for room in self.rooms:
            room.validate()
        known_rooms = set(room_ids)
        for door in self.doorways:
            where = f"doorways[{door.id}]"
            if len(door.connects) != 2:
                raise SchemaViolation("connects must name two sides", where)
            for side in door.connects:
                if side != "exterior" and side not in known_rooms:
                    raise SchemaViolation(f"unknown room {side!r}", where)
            if door.connects[0] == door.connects[1]:
                raise SchemaViolation("doorway must connect two distinct sides", where)
            if door.width <= 0 or door.height <= 0:
                raise SchemaViolation("doorway needs positive width and height", where)
        for win in self.windows:
            where = f"windows[{win.id}]"
            if win.room not in known_rooms:
                raise SchemaViolation(f"unknown room {win.room!r}", where)
            if win.orientation not in CARDINALS:
                raise SchemaViolation(f"orientation must be one of {CARDINALS}", where)
            if win.width <= 0 or win.height <= 0:
                raise SchemaViolation("window needs positive width and height", where)
            if win.sill_height < 0:
                raise SchemaViolation("sill_height cannot be negative", where)
        object_ids = [o.id for o in self.objects]
        if len(set(object_ids)) != len(object_ids):
            raise SchemaViolation("duplicate object ids", "objects")
        known_objects = set(object_ids)
        for obj in self.objects:
            where = f"objects[{obj.id}]"
            if obj.room not in known_rooms:
                raise SchemaViolation(f"unknown room {obj.room!r}", where)
            if obj.category not in CATEGORIES:
                raise SchemaViolation(f"unknown category {obj.category!r}", where)
            if any(s <= 0 for s in obj.size):
                raise SchemaViolation("object size must be positive", where)
            for key, value in obj.attributes.items():
                if not isinstance(value, str):
                    raise SchemaViolation(
                        f"attribute {key!r} must be a string", where
                    )
        for rel in self.relations:
            rel.validate()
            where = f"relations[{rel.kind} {rel.subject}]"
            if rel.subject not in known_objects:
                raise SchemaViolation(f"unknown subject {rel.subject!r}", where)
            if rel.reference is not None and rel.reference not in known_objects:
                raise SchemaViolation(f"unknown reference {rel.reference!r}", where)
        placed = [p.object for p in self.placements]
        if sorted(placed) != sorted(object_ids):
            raise SchemaViolation(
                "placements must cover every object exactly once", "placements"
            )
        for p in self.placements:
            p.validate()
        for idx in self.relaxed_relations:
            if not 0 <= idx < len(self.relations):
                raise SchemaViolation(f"relaxed relation index {idx} out of range", "relaxed_relations")


# ---------------------------------------------------------------------------
# metadata
# ---------------------------------------------------------------------------


def _rect_overlap_area(a, b) -> float:
    w = min(a[2], b[2]) - max(a[0], b[0])
    d = min(a[3], b[3]) - max(a[1], b[1])
    return w * d if w > 0 and d > 0 else 0.0


def _support_location(env: EnvironmentSpec, obj: ObjectSpec, sem: RelationSemantics) -> str:
    """Where an object rests, by geometry alone: "floor", "<id>_top",
    "<id>_in", "wall" (mounted), or "floating"."""
    p = env.placement_of(obj.id)
    box = placed_box(obj, p)
    rect = (box[0], box[2], box[3], box[5])
    area = max((rect[2] - rect[0]) * (rect[3] - rect[1]), 1e-12)
    for other in env.objects:
        if other.id == obj.id:
            continue
        ob = placed_box(other, env.placement_of(other.id))
        inside = (
            box[0] >= ob[0] - sem.support_eps
            and box[2] >= ob[2] - sem.support_eps
            and box[3] <= ob[3] + sem.support_eps
            and box[5] <= ob[5] + sem.support_eps
            and box[4] <= ob[4] + sem.support_eps
        )
        if inside and abs(box[1] - ob[1]) <= sem.support_eps:
            return f"{other.id}_in"
    for other in env.objects:
        if other.id == obj.id:
            continue
        ob = placed_box(other, env.placement_of(other.id))
        if abs(box[1] - ob[4]) <= sem.support_eps:
            orect = (ob[0], ob[2], ob[3], ob[5])
            if _rect_overlap_area(rect, orect) >= sem.support_overlap_frac * area:
                return f"{other.id}_top"
    if abs(box[1]) <= sem.support_eps:
        return "floor"
    mounted = any(
        r.kind == "mounted_on_wall" and r.subject == obj.id for r in env.relations
    )
    if mounted and box[1] > sem.support_eps:
        return "wall"
    return "floating"


def rebuild_metadata(env: EnvironmentSpec, sem: RelationSemantics = DEFAULT_SEMANTICS) -> dict:
    """Derive the (entity, attribute) -> value map from geometry alone.

    Pure: never mutates the environment. Tracked entities with no matching
    object get a presence = absent marker, everything else is derived from
    objects, placements, and declared attributes.
    """
    meta: dict[tuple[str, str], str] = {}
    present = {o.id for o in env.objects}
    for obj in env.objects:
        meta[(obj.id, "presence")] = "present"
        meta[(obj.id, "room")] = obj.room
        meta[(obj.id, "location")] = _support_location(env, obj, sem)
        for key, value in sorted(obj.attributes.items()):
            meta[(obj.id, key)] = value
    for entity in env.tracked_entities:
        if entity not in present:
            meta[(entity, "presence")] = "absent"
    return meta


# ---------------------------------------------------------------------------
# canonical serialization
# ---------------------------------------------------------------------------


def _env_to_dict(env: EnvironmentSpec) -> dict:
    meta = rebuild_metadata(env)
    nested: dict[str, dict[str, str]] = {}
    for (entity, attr), value in meta.items():
        nested.setdefault(entity, {})[attr] = value
    return {
        "schema_version": SCHEMA_VERSION,
        "id": env.id,
        "task_id": env.task_id,
        "trajectory_id": env.trajectory_id,
        "floor_plan": {
            "rooms": [
                {
                    "id": r.id,
                    "vertices": [[_round(x), _round(z)] for x, z in r.vertices],
                    "floor_color": r.floor_color,
                    "floor_material": r.floor_material,
                    "wall_color": r.wall_color,
                    "wall_material": r.wall_material,
                }
                for r in env.rooms
            ],
            "doorways": [
                {
                    "id": d.id,
                    "connects": list(d.connects),
                    "width": _round(d.width),
                    "height": _round(d.height),
                    "position": [_round(d.position[0]), _round(d.position[1])]
                    if d.position
                    else None,
                }
                for d in env.doorways
            ],
            "windows": [
                {
                    "id": w.id,
                    "room": w.room,
                    "orientation": w.orientation,
                    "width": _round(w.width),
                    "height": _round(w.height),
                    "sill_height": _round(w.sill_height),
                    "position": [_round(w.position[0]), _round(w.position[1])]
                    if w.position
                    else None,
                }
                for w in env.windows
            ],
        },
        "objects": [
            {
                "id": o.id,
                "description": o.description,
                "room": o.room,
                "size": [_round(s) for s in o.size],
                "category": o.category,
                "attributes": dict(sorted(o.attributes.items())),
            }
            for o in env.objects
        ],
        "relations": [
            {
                "kind": r.kind,
                "subject": r.subject,
                "reference": r.reference,
                "priority": r.priority,
            }
            for r in env.relations
        ],
        "relaxed_relations": list(env.relaxed_relations),
        "placements": [
            {
                "object": p.object,
                "position": [_round(v) for v in p.position],
                "direction": p.direction,
            }
            for p in env.placements
        ],
        "tracked_entities": sorted(env.tracked_entities),
        "metadata": nested,
    }


def serialize_environment(env: EnvironmentSpec) -> str:
    """Canonical JSON text; embeds freshly rebuilt metadata."""
    env.validate()
    return json.dumps(_env_to_dict(env), sort_keys=True, indent=2) + "\n"


def deserialize_environment(text: str) -> EnvironmentSpec:
    try:
        doc = json.loads(text)
    except ValueError as exc:
        raise SchemaViolation(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaViolation("environment document must be an object")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise SchemaViolation(
            f"unsupported schema_version {doc.get('schema_version')!r}", "schema_version"
        )
    try:
        fp = doc.get("floor_plan", {})
        env = EnvironmentSpec(
            id=doc["id"],
            task_id=doc["task_id"],
            trajectory_id=doc["trajectory_id"],
            rooms=[
                Room(
                    id=r["id"],
                    vertices=tuple((float(x), float(z)) for x, z in r["vertices"]),
                    floor_color=r.get("floor_color", ""),
                    floor_material=r.get("floor_material", ""),
                    wall_color=r.get("wall_color", ""),
                    wall_material=r.get("wall_material", ""),
                )
                for r in fp.get("rooms", [])
            ],
            doorways=[
                Doorway(
                    id=d["id"],
                    connects=tuple(d["connects"]),
                    width=float(d["width"]),
                    height=float(d["height"]),
                    position=tuple(d["position"]) if d.get("position") else None,
                )
                for d in fp.get("doorways", [])
            ],
            windows=[
                Window(
                    id=w["id"],
                    room=w["room"],
                    orientation=w["orientation"],
                    width=float(w["width"]),
                    height=float(w["height"]),
                    sill_height=float(w["sill_height"]),
                    position=tuple(w["position"]) if w.get("position") else None,
                )
                for w in fp.get("windows", [])
            ],
            objects=[
                ObjectSpec(
                    id=o["id"],
                    description=o.get("description", ""),
                    room=o["room"],
                    size=tuple(float(s) for s in o["size"]),
                    category=o["category"],
                    attributes=dict(o.get("attributes", {})),
                )
                for o in doc.get("objects", [])
            ],
            relations=[
                SpatialRelation(
                    kind=r["kind"],
                    subject=r["subject"],
                    reference=r.get("reference"),
                    priority=r.get("priority", "task"),
                )
                for r in doc.get("relations", [])
            ],
            placements=[
                Placement(
                    object=p["object"],
                    position=tuple(float(v) for v in p["position"]),
                    direction=p["direction"],
                )
                for p in doc.get("placements", [])
            ],
            relaxed_relations=list(doc.get("relaxed_relations", [])),
            tracked_entities=list(doc.get("tracked_entities", [])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolation(f"malformed environment document: {exc!r}") from exc
    env.validate()
    env.metadata = rebuild_metadata(env)
    stored = doc.get("metadata")
    if stored is not None:
        rebuilt = {}
        for (entity, attr), value in env.metadata.items():
            rebuilt.setdefault(entity, {})[attr] = value
        if stored != rebuilt:
            raise SchemaViolation(
                "stored metadata disagrees with geometry-derived metadata", "metadata"
            )
    return env
