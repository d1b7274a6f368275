"""Physics validation of placed environments.

Checks a finished EnvironmentSpec along three dimensions and reports
env-level pass/fail for each:

- floor_plan: rooms are well-formed rectangles that do not overlap,
  doorways sit on the shared wall of the rooms they connect, windows sit in
  their room's wall with a positive sill and fit under the wall height.
- entity: every object is placed inside its declared room, no two object
  boxes collide (containment pairs exempt), and nothing floats: each object
  rests on the floor, on another object's top face, inside a container, or
  hangs mounted on a wall.
- relation: every declared spatial relation holds geometrically, except the
  ones listed in relaxed_relations, which are skipped and reported.

All geometry here is computed from the serialized placements. The layout
solver has its own predicate implementations; this module never calls into
it, so a solver bug cannot vouch for itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .environment import EnvironmentSpec, Room, placed_box
from .semantics import DEFAULT_SEMANTICS, DIRECTION_VECTORS, RelationSemantics
from .task_model import Violation

_TOL = 1e-9


@dataclass
class PhysicsReport:
    floor_plan_ok: bool = True
    entity_ok: bool = True
    relation_ok: bool = True
    failures: list[Violation] = field(default_factory=list)
    skipped_relations: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.floor_plan_ok and self.entity_ok and self.relation_ok


def _overlap(a0: float, a1: float, b0: float, b1: float) -> float:
    return min(a1, b1) - max(a0, b0)


def _box_center(box) -> tuple[float, float]:
    return ((box[0] + box[3]) / 2, (box[2] + box[5]) / 2)


def _footprint_gap_to_walls(box, room: Room) -> float:
    return min(
        box[0] - room.x_min,
        room.x_max - box[3],
        box[2] - room.z_min,
        room.z_max - box[5],
    )


def _back_gap(box, direction: str, room: Room) -> float:
    """Distance from the object's back face to the wall it backs onto."""
    if direction == "north":
        return abs(box[2] - room.z_min)
    if direction == "south":
        return abs(room.z_max - box[5])
    if direction == "east":
        return abs(box[0] - room.x_min)
    return abs(room.x_max - box[3])


def _ray_reaches(origin_x: float, origin_z: float, direction: str, box, limit: float | None) -> bool:
    fx, fz = DIRECTION_VECTORS[direction]
    if fx == 0:
        if not (box[0] - _TOL <= origin_x <= box[3] + _TOL):
            return False
        near, far = (box[2], box[5]) if fz > 0 else (box[5], box[2])
        if (far - origin_z) * fz < -_TOL:
            return False
        dist = (near - origin_z) * fz
    else:
        if not (box[2] - _TOL <= origin_z <= box[5] + _TOL):
            return False
        near, far = (box[0], box[3]) if fx > 0 else (box[3], box[0])
        if (far - origin_x) * fx < -_TOL:
            return False
        dist = (near - origin_x) * fx
    if limit is None:
        return True
    return dist <= limit + _TOL


def check_floor_plan(env: EnvironmentSpec, sem: RelationSemantics = DEFAULT_SEMANTICS) -> list[Violation]:
    out: list[Violation] = []
    rooms = list(env.rooms)
    for i in range(len(rooms)):
        for j in range(i + 1, len(rooms)):
            a, b = rooms[i], rooms[j]
            wx = _overlap(a.x_min, a.x_max, b.x_min, b.x_max)
            wz = _overlap(a.z_min, a.z_max, b.z_min, b.z_max)
            if wx > _TOL and wz > _TOL:
                out.append(
                    Violation(
                        "floor_plan",
                        f"{a.id}+{b.id}",
                        f"rooms {a.id} and {b.id} overlap by {wx:.3f}x{wz:.3f} m",
                    )
                )
    for door in env.doorways:
        loc = door.id
        if door.position is None:
            out.append(Violation("floor_plan", loc, "doorway has no position"))
            continue
        if door.height > sem.wall_height + _TOL:
            out.append(Violation("floor_plan", loc, "doorway taller than the wall"))
        px, pz = door.position
        sides = [s for s in door.connects if s != "exterior"]
        side_rooms = [env.room_by_id(s) for s in sides]
        if len(side_rooms) == 2:
            a, b = side_rooms
            on_wall = False
            half = door.width / 2
            if abs(a.x_max - b.x_min) <= _TOL or abs(b.x_max - a.x_min) <= _TOL:
                wall_x = a.x_max if abs(a.x_max - b.x_min) <= _TOL else b.x_max
                lo = max(a.z_min, b.z_min)
                hi = min(a.z_max, b.z_max)
                on_wall = abs(px - wall_x) <= _TOL and lo - _TOL <= pz - half and pz + half <= hi + _TOL
            if not on_wall and (abs(a.z_max - b.z_min) <= _TOL or abs(b.z_max - a.z_min) <= _TOL):
                wall_z = a.z_max if abs(a.z_max - b.z_min) <= _TOL else b.z_max
                lo = max(a.x_min, b.x_min)
                hi = min(a.x_max, b.x_max)
                on_wall = abs(pz - wall_z) <= _TOL and lo - _TOL <= px - half and px + half <= hi + _TOL
            if not on_wall:
                out.append(
                    Violation("floor_plan", loc, "doorway is not on the shared wall of its rooms")
                )
        else:
            room = side_rooms[0]
            half = door.width / 2
            on_x_wall = (
                abs(px - room.x_min) <= _TOL or abs(px - room.x_max) <= _TOL
            ) and room.z_min - _TOL <= pz - half and pz + half <= room.z_max + _TOL
            on_z_wall = (
                abs(pz - room.z_min) <= _TOL or abs(pz - room.z_max) <= _TOL
            ) and room.x_min - _TOL <= px - half and px + half <= room.x_max + _TOL
            if not (on_x_wall or on_z_wall):
                out.append(
                    Violation("floor_plan", loc, "exterior doorway is not on a wall of its room")
                )
    for win in env.windows:
        loc = win.id
        if win.position is None:
            out.append(Violation("floor_plan", loc, "window has no position"))
            continue
        if win.sill_height <= _TOL:
            out.append(Violation("floor_plan", loc, "window sill must sit above the floor"))
        if win.sill_height + win.height > sem.wall_height + _TOL:
            out.append(Violation("floor_plan", loc, "window does not fit under the wall height"))
        room = env.room_by_id(win.room)
        px, pz = win.position
        half = win.width / 2
        if win.orientation in ("north", "south"):
            wall_z = room.z_max if win.orientation == "north" else room.z_min
            ok = abs(pz - wall_z) <= _TOL and room.x_min - _TOL <= px - half and px + half <= room.x_max + _TOL
        else:
            wall_x = room.x_max if win.orientation == "east" else room.x_min
            ok = abs(px - wall_x) <= _TOL and room.z_min - _TOL <= pz - half and pz + half <= room.z_max + _TOL
        if not ok:
            out.append(Violation("floor_plan", loc, "window is not within its wall span"))
    return out


def check_entities(env: EnvironmentSpec, sem: RelationSemantics = DEFAULT_SEMANTICS) -> list[Violation]:
    out: list[Violation] = []
    boxes: dict[str, tuple] = {}
    for obj in env.objects:
        placement = env.placement_of(obj.id)
        boxes[obj.id] = placed_box(obj, placement)

    in_pairs = set()
    mounted = set()
    for rel in env.relations:
        if rel.kind == "in":
            in_pairs.add(frozenset((rel.subject, rel.reference)))
        elif rel.kind == "mounted_on_wall":
            mounted.add(rel.subject)

    for obj in env.objects:
        room = env.room_by_id(obj.room)
        box = boxes[obj.id]
        if not (
            box[0] >= room.x_min - sem.support_eps
            and box[2] >= room.z_min - sem.support_eps
            and box[3] <= room.x_max + sem.support_eps
            and box[5] <= room.z_max + sem.support_eps
        ):
            out.append(
                Violation("entity", obj.id, f"object {obj.id} is outside its room {room.id}")
            )
        if box[4] > sem.wall_height + sem.support_eps:
            out.append(Violation("entity", obj.id, f"object {obj.id} pokes through the ceiling"))

    ids = [o.id for o in env.objects]
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            a, b = ids[i], ids[j]
            if frozenset((a, b)) in in_pairs:
                continue
            ba, bb = boxes[a], boxes[b]
            if (
                _overlap(ba[0], ba[3], bb[0], bb[3]) > _TOL
                and _overlap(ba[1], ba[4], bb[1], bb[4]) > _TOL
                and _overlap(ba[2], ba[5], bb[2], bb[5]) > _TOL
            ):
                out.append(Violation("entity", f"{a}+{b}", f"objects {a} and {b} collide"))

    for obj in env.objects:
        box = boxes[obj.id]
        if abs(box[1]) <= sem.support_eps:
            continue  # on the floor
        supported = False
        for other in env.objects:
            if other.id == obj.id:
                continue
            ob = boxes[other.id]
            if abs(box[1] - ob[4]) <= sem.support_eps:
                w = _overlap(box[0], box[3], ob[0], ob[3])
                d = _overlap(box[2], box[5], ob[2], ob[5])
                area = (box[3] - box[0]) * (box[5] - box[2])
                if w > 0 and d > 0 and w * d >= sem.support_overlap_frac * area - _TOL:
                    supported = True
                    break
            if (
                box[0] >= ob[0] - sem.support_eps
                and box[2] >= ob[2] - sem.support_eps
                and box[3] <= ob[3] + sem.support_eps
                and box[5] <= ob[5] + sem.support_eps
                and box[1] >= ob[1] - sem.support_eps
                and box[4] <= ob[4] + sem.support_eps
            ):
                supported = True
                break
        if not supported and obj.id in mounted:
            room = env.room_by_id(obj.room)
            placement = env.placement_of(obj.id)
            if _back_gap(box, placement.direction, room) <= sem.mount_eps:
                supported = True
        if not supported:
            out.append(
                Violation(
                    "entity",
                    obj.id,
                    f"object {obj.id} floats at height {box[1]:.3f} with no support",
                )
            )
    return out


def _relation_holds(env: EnvironmentSpec, idx: int, sem: RelationSemantics) -> str | None:
    """None when the relation holds, else a human-readable reason."""
    rel = env.relations[idx]
    subject = env.object_by_id(rel.subject)
    sbox = placed_box(subject, env.placement_of(rel.subject))
    scx, scz = _box_center(sbox)
    room = env.room_by_id(subject.room)

    if rel.kind == "edge":
        gap = _footprint_gap_to_walls(sbox, room)
        if gap > sem.edge_max + _TOL:
            return f"nearest wall is {gap:.3f} m away (limit {sem.edge_max})"
        return None
    if rel.kind == "center":
        cx, cz = room.center
        dist = ((scx - cx) ** 2 + (scz - cz) ** 2) ** 0.5
        if dist > sem.center_max + _TOL:
            return f"{dist:.3f} m from room center (limit {sem.center_max})"
        return None
    if rel.kind == "mounted_on_wall":
        placement = env.placement_of(rel.subject)
        gap = _back_gap(sbox, placement.direction, room)
        if gap > sem.mount_eps:
            return f"back face is {gap:.3f} m off the wall"
        if sbox[1] <= _TOL:
            return "mounted object rests on the floor"
        return None

    reference = env.object_by_id(rel.reference)
    rbox = placed_box(reference, env.placement_of(rel.reference))
    rcx, rcz = _box_center(rbox)

    if rel.kind in ("near", "far"):
        dist = ((scx - rcx) ** 2 + (scz - rcz) ** 2) ** 0.5
        if rel.kind == "near" and dist > sem.near_max + _TOL:
            return f"centers are {dist:.3f} m apart (limit {sem.near_max})"
        if rel.kind == "far" and dist < sem.far_min - _TOL:
            return f"centers are {dist:.3f} m apart (minimum {sem.far_min})"
        return None
    if rel.kind == "on_top_of":
        if abs(sbox[1] - rbox[4]) > sem.support_eps:
            return f"bottom at {sbox[1]:.3f}, top of reference at {rbox[4]:.3f}"
        w = _overlap(sbox[0], sbox[3], rbox[0], rbox[3])
        d = _overlap(sbox[2], sbox[5], rbox[2], rbox[5])
        area = (sbox[3] - sbox[0]) * (sbox[5] - sbox[2])
        if w <= 0 or d <= 0 or w * d < sem.support_overlap_frac * area - _TOL:
            return "insufficient footprint overlap with the supporting face"
        return None
    if rel.kind == "in":
        if not (
            sbox[0] >= rbox[0] - sem.support_eps
            and sbox[2] >= rbox[2] - sem.support_eps
            and sbox[3] <= rbox[3] + sem.support_eps
            and sbox[5] <= rbox[5] + sem.support_eps
            and sbox[1] >= rbox[1] - sem.support_eps
            and sbox[4] <= rbox[4] + sem.support_eps
        ):
            return "subject is not inside the container box"
        return None
    if rel.kind == "above":
        if sbox[1] < rbox[4] - sem.support_eps:
            return "subject bottom is below the reference top"
        w = _overlap(sbox[0], sbox[3], rbox[0], rbox[3])
        d = _overlap(sbox[2], sbox[5], rbox[2], rbox[5])
        if w <= 0 or d <= 0:
            return "no footprint overlap"
        return None
    if rel.kind == "in_front_of":
        placement = env.placement_of(rel.reference)
        fx, fz = DIRECTION_VECTORS[placement.direction]
        half = (rbox[3] - rbox[0]) / 2 if fx != 0 else (rbox[5] - rbox[2]) / 2
        if not _ray_reaches(rcx, rcz, placement.direction, sbox, sem.front_max + half):
            return "subject is not within the reference's facing cone"
        return None
    if rel.kind == "side_of":
        placement = env.placement_of(rel.reference)
        fx, fz = DIRECTION_VECTORS[placement.direction]
        dx, dz = scx - rcx, scz - rcz
        longitudinal = dx * fx + dz * fz
        lateral = dx * -fz + dz * fx
        if abs(longitudinal) > sem.side_long_max + _TOL:
            return f"longitudinal offset {abs(longitudinal):.3f} m (limit {sem.side_long_max})"
        if abs(lateral) <= _TOL:
            return "subject sits on the reference's axis, not at its side"
        return None
    if rel.kind == "center_aligned":
        if abs(scx - rcx) > sem.center_aligned_eps + _TOL and abs(scz - rcz) > sem.center_aligned_eps + _TOL:
            return "centers share neither axis"
        return None
    if rel.kind == "face_to":
        sp = env.placement_of(rel.subject)
        rp = env.placement_of(rel.reference)
        if not _ray_reaches(scx, scz, sp.direction, rbox, None):
            return "subject does not face the reference"
        if not _ray_reaches(rcx, rcz, rp.direction, sbox, None):
            return "reference does not face the subject"
        return None
    return f"unknown relation kind {rel.kind!r}"


def check_relations(env: EnvironmentSpec, sem: RelationSemantics = DEFAULT_SEMANTICS) -> tuple[list[Violation], list[int]]:
    violations: list[Violation] = []
    skipped: list[int] = []
    relaxed = set(env.relaxed_relations)
    for idx in range(len(env.relations)):
        if idx in relaxed:
            skipped.append(idx)
            continue
        reason = _relation_holds(env, idx, sem)
        if reason is not None:
            rel = env.relations[idx]
            violations.append(
                Violation(
                    "relation",
                    f"relations[{idx}]",
                    f"{rel.kind}({rel.subject}" + (f", {rel.reference})" if rel.reference else ")") + f": {reason}",
                )
            )
    return violations, skipped


def validate_physics(env: EnvironmentSpec, sem: RelationSemantics = DEFAULT_SEMANTICS) -> PhysicsReport:
    floor = check_floor_plan(env, sem)
    entity = check_entities(env, sem)
    relation, skipped = check_relations(env, sem)
    return PhysicsReport(
        floor_plan_ok=not floor,
        entity_ok=not entity,
        relation_ok=not relation,
        failures=floor + entity + relation,
        skipped_relations=skipped,
    )


def physics_pass_rate(reports: list[PhysicsReport]) -> float:
    """Fraction of environments passing all three dimensions; 1.0 when empty."""
    if not reports:
        return 1.0
    return sum(1 for r in reports if r.ok) / len(reports)
