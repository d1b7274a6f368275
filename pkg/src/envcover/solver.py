"""Discrete layout solver for object arrangement.

Encodes a scene draft (rooms, openings, objects, spatial relations) as a
finite CSP: per object one position variable (grid cells in its room) and one
direction variable (four cardinals), plus one position variable per doorway
and window. Heights are not searched: an object's bottom height follows from
its support chain (floor, the top face of the object it rests on, the bottom
of its container, or the wall-mount height).

The search is depth-first backtracking with forward checking. Variable order
is largest footprint first (ties by id); value order is a seeded shuffle, so
a fixed seed and config reproduce the identical solution. Exhausting the
search space returns an unsat solution; hitting the backtrack budget or the
wall-clock limit raises SolverTimeout instead, because a capped search proves
nothing.

Relation predicates here are written against this module's own box math; the
physics validator re-implements the same semantics table independently.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field

from .environment import (
    CONTACT_KINDS,
    DISTANCE_KINDS,
    Doorway,
    ObjectSpec,
    Placement,
    RELATIVE_KINDS,
    Room,
    SpatialRelation,
    UNARY_KINDS,
    Window,
    footprint,
)
from .errors import CoreUnsat, EncodingError, SolverTimeout
from .semantics import DEFAULT_SEMANTICS, DIRECTION_VECTORS, RelationSemantics

_TOL = 1e-9

# relation predicates that depend on footprint centers alone
_POSITION_ONLY_KINDS = frozenset({"near", "far", "center_aligned"})


@dataclass(frozen=True)
class SolverConfig:
    grid_resolution: float = 0.1
    seed: int = 0
    max_backtracks: int = 50000
    time_limit_s: float = 60.0
    semantics: RelationSemantics = DEFAULT_SEMANTICS


@dataclass(frozen=True)
class CspVariable:
    id: str
    entity: str
    kind: str  # "position" | "direction" | "opening"


@dataclass(frozen=True)
class CspConstraint:
    id: str
    kind: str  # a relation kind, or a physical kind
    scope: tuple[str, ...]  # entity ids; arity = len(scope) <= 3
    relaxable: bool = False
    priority: str = "physical"
    relation_index: int | None = None

    @property
    def arity(self) -> int:
        return len(self.scope)


@dataclass
class Solution:
    status: str  # "sat" | "unsat"
    assignments: dict = field(default_factory=dict)
    placements: list[Placement] = field(default_factory=list)
    door_positions: dict = field(default_factory=dict)
    window_positions: dict = field(default_factory=dict)
    relaxed: list[str] = field(default_factory=list)
    stats: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# geometry helpers (solver-side)
# ---------------------------------------------------------------------------


def _grid_points(lo: float, hi: float, res: float) -> list[float]:
    pts = []
    k = 0
    while True:
        v = lo + k * res
        if v > hi + _TOL:
            break
        pts.append(round(v, 6))
        k += 1
    return pts


def _overlap_1d(a0, a1, b0, b1) -> float:
    return min(a1, b1) - max(a0, b0)


class _Geometry:
    """Per-problem cached footprints and support heights."""

    def __init__(self, rooms, objects, sem: RelationSemantics):
        self.sem = sem
        self.rooms = {r.id: r for r in rooms}
        self.objects = {o.id: o for o in objects}
        self.base_y: dict[str, float] = {}
        self.footprints: dict[tuple[str, str], tuple[float, float]] = {}
        for o in objects:
            for d in DIRECTION_VECTORS:
                self.footprints[(o.id, d)] = footprint(o.size, d)

    def box(self, obj_id: str, pos, direction: str):
        fx, fz = self.footprints[(obj_id, direction)]
        x, z = pos
        y = self.base_y[obj_id]
        h = self.objects[obj_id].size[1]
        return (x - fx / 2, y, z - fz / 2, x + fx / 2, y + h, z + fz / 2)


def _support_plan(objects, relations, sem: RelationSemantics):
    """Support mode per object: how its bottom height is determined.

    Returns ({obj_id: (mode, ref_or_None)}, base_y) and rejects cycles.
    Modes: floor, top (resting on ref's top face), in (container bottom),
    wall (mounted).
    """
    mode: dict[str, tuple[str, str | None]] = {}
    for o in objects:
        mode[o.id] = ("floor", None)
    for rel in relations:
        if rel.kind == "on_top_of":
            mode[rel.subject] = ("top", rel.reference)
        elif rel.kind == "in":
            mode[rel.subject] = ("in", rel.reference)
        elif rel.kind == "mounted_on_wall":
            mode[rel.subject] = ("wall", None)
    by_id = {o.id: o for o in objects}
    base_y: dict[str, float] = {}

    def resolve(obj_id: str, trail: tuple[str, ...]) -> float:
        if obj_id in base_y:
            return base_y[obj_id]
        if obj_id in trail:
            raise EncodingError(
                "support cycle: " + " -> ".join(trail + (obj_id,))
            )
        m, ref = mode[obj_id]
        if m == "floor":
            y = 0.0
        elif m == "top":
            y = resolve(ref, trail + (obj_id,)) + by_id[ref].size[1]
        elif m == "in":
            y = resolve(ref, trail + (obj_id,))
        else:  # wall
            obj = by_id[obj_id]
            y = float(obj.attributes.get("mount_height", sem.mount_height))
        base_y[obj_id] = round(y, 6)
        return base_y[obj_id]

    for o in objects:
        resolve(o.id, ())
    return mode, base_y


def _shared_wall(a: Room, b: Room):
    """Shared boundary segment of two adjacent rooms, or None.

    Returns ("x", wall_coord, lo, hi) for a wall at constant x, or
    ("z", wall_coord, lo, hi) for a wall at constant z.
    """
    for r1, r2 in ((a, b), (b, a)):
        if abs(r1.x_max - r2.x_min) <= _TOL:
            lo, hi = max(r1.z_min, r2.z_min), min(r1.z_max, r2.z_max)
            if hi - lo > _TOL:
                return ("x", r1.x_max, lo, hi)
        if abs(r1.z_max - r2.z_min) <= _TOL:
            lo, hi = max(r1.x_min, r2.x_min), min(r1.x_max, r2.x_max)
            if hi - lo > _TOL:
                return ("z", r1.z_max, lo, hi)
    return None


def _wall_of(room: Room, orientation: str):
    if orientation == "north":
        return ("z", room.z_max, room.x_min, room.x_max)
    if orientation == "south":
        return ("z", room.z_min, room.x_min, room.x_max)
    if orientation == "east":
        return ("x", room.x_max, room.z_min, room.z_max)
    return ("x", room.x_min, room.z_min, room.z_max)


def _positions_on_wall(wall, width: float, res: float) -> list[tuple[float, float]]:
    axis, coord, lo, hi = wall
    centers = _grid_points(lo + width / 2, hi - width / 2, res)
    if axis == "x":
        return [(coord, c) for c in centers]
    return [(c, coord) for c in centers]


# ---------------------------------------------------------------------------
# encoding
# ---------------------------------------------------------------------------


class CspProblem:
    def __init__(self, rooms, doorways, windows, objects, relations, config: SolverConfig):
        self.rooms = list(rooms)
        self.doorways = list(doorways)
        self.windows = list(windows)
        self.objects = list(objects)
        self.relations = list(relations)
        self.config = config
        self.sem = config.semantics
        self.geo = _Geometry(self.rooms, self.objects, self.sem)
        self.variables: list[CspVariable] = []
        self.domains: dict[str, list] = {}
        self.constraints: list[CspConstraint] = []
        self._checks: dict[str, object] = {}  # constraint id -> callable
        self._static_failures: list[str] = []
        self._encode()

    # -- construction -------------------------------------------------------

    def _encode(self) -> None:
        sem = self.sem
        res = self.config.grid_resolution
        for o in self.objects:
            if o.room not in self.geo.rooms:
                raise EncodingError(f"object {o.id!r} names unknown room {o.room!r}")
            if o.size[1] > sem.wall_height + _TOL:
                raise EncodingError(f"object {o.id!r} is taller than the walls")
        room_of = {o.id: self.geo.rooms[o.room] for o in self.objects}
        mode, base_y = _support_plan(self.objects, self.relations, sem)
        self.geo.base_y = base_y
        self.support_mode = mode

        # variables and domains
        order = sorted(
            self.objects, key=lambda o: (-(o.size[0] * o.size[2]), o.id)
        )
        for o in order:
            room = room_of[o.id]
            fits_any = [
                d
                for d in DIRECTION_VECTORS
                if self.geo.footprints[(o.id, d)][0] <= room.x_max - room.x_min + _TOL
                and self.geo.footprints[(o.id, d)][1] <= room.z_max - room.z_min + _TOL
            ]
            if not fits_any:
                raise EncodingError(f"object {o.id!r} does not fit in room {room.id!r}")
            min_fx = min(self.geo.footprints[(o.id, d)][0] for d in fits_any)
            min_fz = min(self.geo.footprints[(o.id, d)][1] for d in fits_any)
            xs = _grid_points(room.x_min + min_fx / 2, room.x_max - min_fx / 2, res)
            zs = _grid_points(room.z_min + min_fz / 2, room.z_max - min_fz / 2, res)
            cells = [(x, z) for x in xs for z in zs]
            if not cells:
                raise EncodingError(f"no grid cell fits object {o.id!r} in room {room.id!r}")
            dvar = CspVariable(id=f"{o.id}.dir", entity=o.id, kind="direction")
            pvar = CspVariable(id=f"{o.id}.pos", entity=o.id, kind="position")
            self.variables += [dvar, pvar]
            self.domains[dvar.id] = list(DIRECTION_VECTORS)
            self.domains[pvar.id] = cells

        for door in sorted(self.doorways, key=lambda d: d.id):
            a, b = door.connects
            if "exterior" in (a, b):
                room = self.geo.rooms[a if b == "exterior" else b]
                cells = []
                for orientation in ("north", "south", "east", "west"):
                    cells += _positions_on_wall(_wall_of(room, orientation), door.width, res)
            else:
                wall = _shared_wall(self.geo.rooms[a], self.geo.rooms[b])
                if wall is None:
                    raise EncodingError(f"doorway {door.id!r} connects non-adjacent rooms")
                cells = _positions_on_wall(wall, door.width, res)
            if not cells:
                raise EncodingError(f"doorway {door.id!r} does not fit on its wall")
            if door.height > sem.wall_height + _TOL:
                raise EncodingError(f"doorway {door.id!r} is taller than the walls")
            var = CspVariable(id=f"{door.id}.pos", entity=door.id, kind="opening")
            self.variables.append(var)
            self.domains[var.id] = cells

        for win in sorted(self.windows, key=lambda w: w.id):
            room = self.geo.rooms.get(win.room)
            if room is None:
                raise EncodingError(f"window {win.id!r} names unknown room {win.room!r}")
            if win.sill_height + win.height > sem.wall_height + _TOL:
                raise EncodingError(f"window {win.id!r} does not fit under the wall height")
            cells = _positions_on_wall(_wall_of(room, win.orientation), win.width, res)
            if not cells:
                raise EncodingError(f"window {win.id!r} is wider than its wall")
            var = CspVariable(id=f"{win.id}.pos", entity=win.id, kind="opening")
            self.variables.append(var)
            self.domains[var.id] = cells

        self._emit_constraints()

    def _emit_constraints(self) -> None:
        sem = self.sem
        geo = self.geo
        room_of = {o.id: geo.rooms[o.room] for o in self.objects}

        def add(cid, kind, scope, check, relaxable=False, priority="physical", rel_idx=None):
            self.constraints.append(
                CspConstraint(
                    id=cid,
                    kind=kind,
                    scope=tuple(scope),
                    relaxable=relaxable,
                    priority=priority,
                    relation_index=rel_idx,
                )
            )
            self._checks[cid] = check

        # rooms must not overlap (static: rooms are fixed inputs)
        for i in range(len(self.rooms)):
            for j in range(i + 1, len(self.rooms)):
                a, b = self.rooms[i], self.rooms[j]

                def rooms_ok(assign, a=a, b=b):
                    return (
                        _overlap_1d(a.x_min, a.x_max, b.x_min, b.x_max) <= _TOL
                        or _overlap_1d(a.z_min, a.z_max, b.z_min, b.z_max) <= _TOL
                    )

                add(f"phys:room_non_overlap:{a.id}+{b.id}", "room_non_overlap", (), rooms_ok)

        in_pairs = {
            frozenset((r.subject, r.reference))
            for r in self.relations
            if r.kind == "in"
        }

        for o in self.objects:
            room = room_of[o.id]

            def contained(assign, o=o, room=room):
                box = geo.box(o.id, assign[f"{o.id}.pos"], assign[f"{o.id}.dir"])
                return (
                    box[0] >= room.x_min - _TOL
                    and box[2] >= room.z_min - _TOL
                    and box[3] <= room.x_max + _TOL
                    and box[5] <= room.z_max + _TOL
                )

            add(f"phys:containment:{o.id}", "room_containment", (o.id,), contained)

        for o in self.objects:
            m, ref = self.support_mode[o.id]
            if m == "top":

                def supported(assign, o=o, ref=ref):
                    a = geo.box(o.id, assign[f"{o.id}.pos"], assign[f"{o.id}.dir"])
                    b = geo.box(ref, assign[f"{ref}.pos"], assign[f"{ref}.dir"])
                    w = _overlap_1d(a[0], a[3], b[0], b[3])
                    d = _overlap_1d(a[2], a[5], b[2], b[5])
                    if w <= 0 or d <= 0:
                        return False
                    area = (a[3] - a[0]) * (a[5] - a[2])
                    return w * d >= sem.support_overlap_frac * area - _TOL

                add(f"phys:support:{o.id}", "support", (o.id, ref), supported)
            elif m == "in":

                def inside(assign, o=o, ref=ref):
                    a = geo.box(o.id, assign[f"{o.id}.pos"], assign[f"{o.id}.dir"])
                    b = geo.box(ref, assign[f"{ref}.pos"], assign[f"{ref}.dir"])
                    return (
                        a[0] >= b[0] - sem.support_eps
                        and a[2] >= b[2] - sem.support_eps
                        and a[3] <= b[3] + sem.support_eps
                        and a[5] <= b[5] + sem.support_eps
                        and a[4] <= b[4] + sem.support_eps
                    )

                add(f"phys:support:{o.id}", "support", (o.id, ref), inside)
            elif m == "wall":

                def flush(assign, o=o, room=room_of[o.id]):
                    pos = assign[f"{o.id}.pos"]
                    direction = assign[f"{o.id}.dir"]
                    box = geo.box(o.id, pos, direction)
                    back = {
                        "north": box[2] - room.z_min,
                        "south": room.z_max - box[5],
                        "east": box[0] - room.x_min,
                        "west": room.x_max - box[3],
                    }[direction]
                    return abs(back) <= sem.mount_eps

                add(f"phys:support:{o.id}", "support", (o.id,), flush)
            else:

                def on_floor(assign, o=o):
                    return geo.base_y[o.id] <= _TOL

                add(f"phys:support:{o.id}", "support", (o.id,), on_floor)

        by_room: dict[str, list[ObjectSpec]] = {}
        for o in self.objects:
            by_room.setdefault(o.room, []).append(o)
        for room_objects in by_room.values():
            for i in range(len(room_objects)):
                for j in range(i + 1, len(room_objects)):
                    a, b = room_objects[i], room_objects[j]
                    if frozenset((a.id, b.id)) in in_pairs:
                        continue  # containment implies overlap by design

                    def apart(assign, a=a, b=b):
                        ba = geo.box(a.id, assign[f"{a.id}.pos"], assign[f"{a.id}.dir"])
                        bb = geo.box(b.id, assign[f"{b.id}.pos"], assign[f"{b.id}.dir"])
                        return (
                            _overlap_1d(ba[0], ba[3], bb[0], bb[3]) <= _TOL
                            or _overlap_1d(ba[1], ba[4], bb[1], bb[4]) <= _TOL
                            or _overlap_1d(ba[2], ba[5], bb[2], bb[5]) <= _TOL
                        )

                    add(f"phys:non_collision:{a.id}+{b.id}", "non_collision", (a.id, b.id), apart)

        for door in self.doorways:

            def door_ok(assign, door=door):
                return assign[f"{door.id}.pos"] is not None

            add(f"phys:door_on_wall:{door.id}", "door_on_wall", (door.id,), door_ok)

        for win in self.windows:

            def win_ok(assign, win=win):
                return assign[f"{win.id}.pos"] is not None

            add(f"phys:window_in_wall:{win.id}", "window_in_wall", (win.id,), win_ok)

        for idx, rel in enumerate(self.relations):
            check = self._relation_check(rel)
            scope = (rel.subject,) if rel.reference is None else (rel.subject, rel.reference)
            relaxable = rel.priority == "enrichment" and rel.kind not in CONTACT_KINDS
            add(
                f"rel[{idx}]:{rel.kind}:{rel.subject}",
                rel.kind,
                scope,
                check,
                relaxable=relaxable,
                priority=rel.priority,
                rel_idx=idx,
            )

    # -- relation predicates (solver-side geometry) -------------------------

    def _relation_check(self, rel: SpatialRelation):
        sem = self.sem
        geo = self.geo
        s = rel.subject
        r = rel.reference
        room = geo.rooms[geo.objects[s].room]

        def sbox(assign):
            return geo.box(s, assign[f"{s}.pos"], assign[f"{s}.dir"])

        def rbox(assign):
            return geo.box(r, assign[f"{r}.pos"], assign[f"{r}.dir"])

        def centers(assign):
            sx, sz = assign[f"{s}.pos"]
            rx, rz = assign[f"{r}.pos"]
            return sx, sz, rx, rz

        if rel.kind == "near":

            def check(assign):
                sx, sz, rx, rz = centers(assign)
                return (sx - rx) ** 2 + (sz - rz) ** 2 <= sem.near_max**2 + _TOL

        elif rel.kind == "far":

            def check(assign):
                sx, sz, rx, rz = centers(assign)
                return (sx - rx) ** 2 + (sz - rz) ** 2 >= sem.far_min**2 - _TOL

        elif rel.kind == "on_top_of":

            def check(assign):
                a, b = sbox(assign), rbox(assign)
                if abs(a[1] - b[4]) > sem.support_eps:
                    return False
                w = _overlap_1d(a[0], a[3], b[0], b[3])
                d = _overlap_1d(a[2], a[5], b[2], b[5])
                if w <= 0 or d <= 0:
                    return False
                return w * d >= sem.support_overlap_frac * (a[3] - a[0]) * (a[5] - a[2]) - _TOL

        elif rel.kind == "in":

            def check(assign):
                a, b = sbox(assign), rbox(assign)
                return (
                    a[0] >= b[0] - sem.support_eps
                    and a[2] >= b[2] - sem.support_eps
                    and a[3] <= b[3] + sem.support_eps
                    and a[5] <= b[5] + sem.support_eps
                    and a[1] >= b[1] - sem.support_eps
                    and a[4] <= b[4] + sem.support_eps
                )

        elif rel.kind == "edge":

            def check(assign):
                a = sbox(assign)
                gap = min(
                    a[0] - room.x_min,
                    room.x_max - a[3],
                    a[2] - room.z_min,
                    room.z_max - a[5],
                )
                return gap <= sem.edge_max + _TOL

        elif rel.kind == "center":

            def check(assign):
                sx, sz = assign[f"{s}.pos"]
                cx, cz = room.center
                return (sx - cx) ** 2 + (sz - cz) ** 2 <= sem.center_max**2 + _TOL

        elif rel.kind == "mounted_on_wall":

            def check(assign):
                a = sbox(assign)
                direction = assign[f"{s}.dir"]
                back = {
                    "north": a[2] - room.z_min,
                    "south": room.z_max - a[5],
                    "east": a[0] - room.x_min,
                    "west": room.x_max - a[3],
                }[direction]
                return abs(back) <= sem.mount_eps and a[1] > _TOL

        elif rel.kind == "above":

            def check(assign):
                a, b = sbox(assign), rbox(assign)
                if a[1] < b[4] - sem.support_eps:
                    return False
                w = _overlap_1d(a[0], a[3], b[0], b[3])
                d = _overlap_1d(a[2], a[5], b[2], b[5])
                return w > 0 and d > 0

        elif rel.kind == "in_front_of":

            def check(assign):
                a = sbox(assign)
                rx, rz = assign[f"{r}.pos"]
                direction = assign[f"{r}.dir"]
                fx, fz = geo.footprints[(r, direction)]
                return _ray_hits(a, rx, rz, direction, sem.front_max + max(fx, fz) / 2)

        elif rel.kind == "side_of":

            def check(assign):
                sx, sz, rx, rz = centers(assign)
                dx, dz = sx - rx, sz - rz
                fvx, fvz = DIRECTION_VECTORS[assign[f"{r}.dir"]]
                longitudinal = dx * fvx + dz * fvz
                lateral = dx * -fvz + dz * fvx
                return abs(longitudinal) <= sem.side_long_max + _TOL and abs(lateral) > _TOL

        elif rel.kind == "center_aligned":

            def check(assign):
                sx, sz, rx, rz = centers(assign)
                return (
                    abs(sx - rx) <= sem.center_aligned_eps + _TOL
                    or abs(sz - rz) <= sem.center_aligned_eps + _TOL
                )

        elif rel.kind == "face_to":

            def check(assign):
                a, b = sbox(assign), rbox(assign)
                sx, sz = assign[f"{s}.pos"]
                rx, rz = assign[f"{r}.pos"]
                return _ray_hits(b, sx, sz, assign[f"{s}.dir"], None) and _ray_hits(
                    a, rx, rz, assign[f"{r}.dir"], None
                )

        else:
            raise EncodingError(f"relation kind {rel.kind!r} has no solver semantics")
        return check

    # -- evaluation helpers --------------------------------------------------

    def scope_vars(self, constraint: CspConstraint) -> tuple[str, ...]:
        # distance and alignment predicates read footprint centers only, so
        # their scope must not include direction variables: a tighter scope
        # lets forward checking prune position domains as soon as the other
        # endpoint's position is known
        if constraint.kind in _POSITION_ONLY_KINDS:
            return tuple(f"{entity}.pos" for entity in constraint.scope)
        out = []
        for entity in constraint.scope:
            if entity in self.geo.objects:
                out += [f"{entity}.dir", f"{entity}.pos"]
            else:
                out.append(f"{entity}.pos")
        return tuple(out)

    def check_assignment(self, assignment: dict, skip: frozenset = frozenset()) -> bool:
        """Evaluate every (non-skipped) constraint under a full assignment."""
        for c in self.constraints:
            if c.id in skip:
                continue
            if not self._checks[c.id](assignment):
                return False
        return True

    def relax_order(self) -> list[CspConstraint]:
        """Relaxable constraints in drop order: distance, relative, unary."""
        groups = (DISTANCE_KINDS, RELATIVE_KINDS, UNARY_KINDS)
        out = []
        for group in groups:
            for c in self.constraints:
                if c.relaxable and c.kind in group:
                    out.append(c)
        return out


def _ray_hits(rect_box, ox: float, oz: float, direction: str, max_dist: float | None) -> bool:
    """Does the ray from (ox, oz) along a cardinal hit the box footprint?

    max_dist bounds the distance from the origin to the box's near edge
    (None = unbounded). The origin sitting inside the footprint counts as
    a hit at distance zero.
    """
    x0, _, z0, x1, _, z1 = rect_box
    if direction == "north":
        lateral_ok = x0 - _TOL <= ox <= x1 + _TOL
        ahead = z1 >= oz - _TOL
        dist = z0 - oz
    elif direction == "south":
        lateral_ok = x0 - _TOL <= ox <= x1 + _TOL
        ahead = z0 <= oz + _TOL
        dist = oz - z1
    elif direction == "east":
        lateral_ok = z0 - _TOL <= oz <= z1 + _TOL
        ahead = x1 >= ox - _TOL
        dist = x0 - ox
    else:
        lateral_ok = z0 - _TOL <= oz <= z1 + _TOL
        ahead = x0 <= ox + _TOL
        dist = ox - x1
    if not (lateral_ok and ahead):
        return False
    if max_dist is None:
        return True
    return dist <= max_dist + _TOL


def encode(rooms, doorways, windows, objects, relations, config: SolverConfig | None = None) -> CspProblem:
    """Build the CSP for a scene draft; raises EncodingError when impossible."""
    return CspProblem(rooms, doorways, windows, objects, relations, config or SolverConfig())


# ---------------------------------------------------------------------------
# search
# ---------------------------------------------------------------------------


def solve(problem: CspProblem, skip: frozenset = frozenset()) -> Solution:
    """Backtracking search with forward checking.

    Returns a sat Solution with placements, or an unsat Solution after the
    search space is exhausted. Raises SolverTimeout when max_backtracks or
    the time limit is hit. ``skip`` names constraint ids to ignore (used by
    relaxation).
    """
    config = problem.config
    rng = random.Random(config.seed)
    deadline = time.monotonic() + config.time_limit_s

    active = [c for c in problem.constraints if c.id not in skip]
    for c in active:
        if c.arity == 0 and not problem._checks[c.id](None):
            return Solution(status="unsat", stats={"backtracks": 0, "assignments": 0})

    order = [v.id for v in problem.variables]
    domains = {vid: list(problem.domains[vid]) for vid in order}
    for vid in order:
        rng.shuffle(domains[vid])

    by_var: dict[str, list[CspConstraint]] = {vid: [] for vid in order}
    scope_cache: dict[str, tuple[str, ...]] = {}
    for c in active:
        if c.arity == 0:
            continue
        svars = problem.scope_vars(c)
        scope_cache[c.id] = svars
        for vid in svars:
            by_var[vid].append(c)

    assignment: dict[str, object] = {}
    stats = {"backtracks": 0, "assignments": 0}
    checks = problem._checks

    def consistent_after(vid: str) -> bool:
        for c in by_var[vid]:
            svars = scope_cache[c.id]
            if all(v in assignment for v in svars):
                if not checks[c.id](assignment):
                    return False
        return True

    def forward_check(vid: str, trail: list) -> bool:
        for c in by_var[vid]:
            svars = scope_cache[c.id]
            unassigned = [v for v in svars if v not in assignment]
            if len(unassigned) != 1:
                continue
            u = unassigned[0]
            keep = []
            removed = []
            for value in domains[u]:
                assignment[u] = value
                ok = checks[c.id](assignment)
                del assignment[u]
                (keep if ok else removed).append(value)
            if removed:
                trail.append((u, domains[u]))
                domains[u] = keep
            if not keep:
                return False
        return True

    def backtrack(depth: int) -> bool:
        if depth == len(order):
            return True
        if time.monotonic() > deadline:
            raise SolverTimeout(f"time limit of {config.time_limit_s}s exceeded")
        vid = order[depth]
        for value in list(domains[vid]):
            assignment[vid] = value
            stats["assignments"] += 1
            trail: list = []
            if consistent_after(vid) and forward_check(vid, trail):
                if backtrack(depth + 1):
                    return True
            for u, old in reversed(trail):
                domains[u] = old
            del assignment[vid]
            stats["backtracks"] += 1
            if stats["backtracks"] > config.max_backtracks:
                raise SolverTimeout(
                    f"backtrack budget of {config.max_backtracks} exceeded"
                )
        return False

    if not backtrack(0):
        return Solution(status="unsat", stats=dict(stats))

    placements = []
    for o in problem.objects:
        x, z = assignment[f"{o.id}.pos"]
        placements.append(
            Placement(
                object=o.id,
                position=(x, problem.geo.base_y[o.id], z),
                direction=assignment[f"{o.id}.dir"],
            )
        )
    doors = {d.id: tuple(assignment[f"{d.id}.pos"]) for d in problem.doorways}
    windows = {w.id: tuple(assignment[f"{w.id}.pos"]) for w in problem.windows}
    return Solution(
        status="sat",
        assignments=dict(assignment),
        placements=placements,
        door_positions=doors,
        window_positions=windows,
        stats=dict(stats),
    )


def solve_with_relaxation(problem: CspProblem) -> Solution:
    """Solve, dropping relaxable constraints one at a time in policy order.

    The returned Solution.relaxed is always a prefix of the relax order.
    Raises CoreUnsat when the problem stays unsat with every relaxable
    constraint dropped; SolverTimeout propagates untouched.
    """
    ladder = [c.id for c in problem.relax_order()]
    dropped: list[str] = []
    while True:
        solution = solve(problem, skip=frozenset(dropped))
        if solution.status == "sat":
            solution.relaxed = list(dropped)
            return solution
        if len(dropped) == len(ladder):
            raise CoreUnsat(
                "unsatisfiable with all relaxable constraints dropped "
                f"({len(ladder)} dropped)"
            )
        dropped.append(ladder[len(dropped)])
