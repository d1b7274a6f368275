import json

import pytest

from envcover.environment import (
    Doorway,
    EnvironmentSpec,
    ObjectSpec,
    Placement,
    Room,
    SpatialRelation,
    Window,
    deserialize_environment,
    footprint,
    make_room,
    placed_box,
    rebuild_metadata,
    serialize_environment,
)
from envcover.errors import SchemaViolation


def obj(id, size, room="main", category="enrichment", **attributes):
    return ObjectSpec(
        id=id,
        description=f"a {id}",
        room=room,
        size=size,
        category=category,
        attributes=attributes,
    )


def placed(id, x, y, z, direction="north"):
    return Placement(object=id, position=(x, y, z), direction=direction)


def sample_env() -> EnvironmentSpec:
    return EnvironmentSpec(
        id="env-000",
        task_id="demo",
        trajectory_id="t0",
        rooms=[make_room("main", 0.0, 0.0, 4.0, 4.0, floor_color="oak")],
        doorways=[
            Doorway(id="door", connects=("main", "exterior"), width=0.9, height=2.0, position=(2.0, 0.0))
        ],
        windows=[
            Window(id="win", room="main", orientation="north", width=1.0, height=1.0, sill_height=0.9, position=(1.5, 4.0))
        ],
        objects=[
            obj("table", (1.0, 0.8, 1.0), category="task_related", material="wood"),
            obj("cup", (0.2, 0.1, 0.2)),
            obj("bin", (1.0, 0.5, 1.0)),
            obj("coin", (0.2, 0.05, 0.2)),
            obj("picture", (0.5, 0.5, 0.1)),
        ],
        relations=[
            SpatialRelation(kind="on_top_of", subject="cup", reference="table"),
            SpatialRelation(kind="mounted_on_wall", subject="picture", priority="enrichment"),
            SpatialRelation(kind="near", subject="bin", reference="table", priority="enrichment"),
        ],
        placements=[
            placed("table", 1.0, 0.0, 1.0),
            placed("cup", 1.0, 0.8, 1.0),
            placed("bin", 3.0, 0.0, 3.0),
            placed("coin", 3.0, 0.0, 3.0),
            placed("picture", 2.0, 1.5, 3.95),
        ],
        tracked_entities=["cup", "unicorn"],
    )


# ---------------------------------------------------------------------------
# geometry helpers
# ---------------------------------------------------------------------------


def test_footprint_swaps_extents_for_east_west():
    assert footprint((2.0, 0.8, 0.9), "north") == (2.0, 0.9)
    assert footprint((2.0, 0.8, 0.9), "south") == (2.0, 0.9)
    assert footprint((2.0, 0.8, 0.9), "east") == (0.9, 2.0)
    assert footprint((2.0, 0.8, 0.9), "west") == (0.9, 2.0)


def test_placed_box_centers_footprint_on_position():
    o = obj("table", (1.0, 0.8, 2.0))
    box = placed_box(o, placed("table", 1.0, 0.0, 2.0, "east"))
    assert box == (0.0, 0.0, 1.5, 2.0, 0.8, 2.5)


def test_room_extent_properties():
    room = make_room("main", 1.0, 2.0, 3.0, 6.0)
    assert (room.x_min, room.x_max, room.z_min, room.z_max) == (1.0, 3.0, 2.0, 6.0)
    assert room.center == (2.0, 4.0)


# ---------------------------------------------------------------------------
# structural validation
# ---------------------------------------------------------------------------


def test_sample_env_is_structurally_valid():
    sample_env().validate()


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda e: e.rooms.append(make_room("main", 5, 5, 6, 6)), "duplicate room"),
        (
            lambda e: e.rooms.__setitem__(
                0, Room(id="main", vertices=((0, 0), (4, 0), (4, 4)))
            ),
            "4 vertices",
        ),
        (
            lambda e: e.rooms.__setitem__(
                0, Room(id="main", vertices=((0, 0), (4, 1), (4, 4), (0, 3)))
            ),
            "axis-aligned",
        ),
        (
            lambda e: e.doorways.__setitem__(
                0, Doorway(id="door", connects=("main", "attic"), width=0.9, height=2.0)
            ),
            "unknown room",
        ),
        (
            lambda e: e.doorways.__setitem__(
                0, Doorway(id="door", connects=("main", "main"), width=0.9, height=2.0)
            ),
            "distinct sides",
        ),
        (
            lambda e: e.windows.__setitem__(
                0,
                Window(id="win", room="main", orientation="up", width=1, height=1, sill_height=0.9),
            ),
            "orientation",
        ),
        (
            lambda e: e.windows.__setitem__(
                0,
                Window(id="win", room="main", orientation="north", width=1, height=1, sill_height=-0.1),
            ),
            "sill_height",
        ),
        (lambda e: e.objects.append(obj("cup", (0.1, 0.1, 0.1))), "duplicate object"),
        (
            lambda e: e.objects.__setitem__(0, obj("table", (1.0, 0.8, 1.0), room="attic")),
            "unknown room",
        ),
        (
            lambda e: e.objects.__setitem__(
                0, obj("table", (1.0, 0.8, 1.0), category="decor")
            ),
            "category",
        ),
        (
            lambda e: e.objects.__setitem__(0, obj("table", (1.0, 0.0, 1.0))),
            "size must be positive",
        ),
        (
            lambda e: e.objects.__setitem__(
                0, obj("table", (1.0, 0.8, 1.0), weight=12)
            ),
            "must be a string",
        ),
        (
            lambda e: e.relations.__setitem__(
                0, SpatialRelation(kind="hovering", subject="cup")
            ),
            "unknown relation kind",
        ),
        (
            lambda e: e.relations.__setitem__(
                0, SpatialRelation(kind="edge", subject="cup", reference="table")
            ),
            "no reference",
        ),
        (
            lambda e: e.relations.__setitem__(0, SpatialRelation(kind="near", subject="cup")),
            "needs a reference",
        ),
        (
            lambda e: e.relations.__setitem__(
                0, SpatialRelation(kind="near", subject="cup", reference="cup")
            ),
            "own subject",
        ),
        (
            lambda e: e.relations.__setitem__(
                0, SpatialRelation(kind="near", subject="ghost", reference="table")
            ),
            "unknown subject",
        ),
        (lambda e: e.placements.pop(), "every object exactly once"),
        (
            lambda e: e.placements.__setitem__(0, placed("table", 1, 0, 1, "up")),
            "direction",
        ),
        (lambda e: e.relaxed_relations.append(9), "out of range"),
    ],
)
def test_validate_rejects_structural_defects(mutate, message):
    env = sample_env()
    mutate(env)
    with pytest.raises(SchemaViolation, match=message):
        env.validate()


# ---------------------------------------------------------------------------
# metadata derivation
# ---------------------------------------------------------------------------


def test_metadata_reads_support_from_geometry():
    meta = rebuild_metadata(sample_env())
    assert meta[("table", "location")] == "floor"
    assert meta[("cup", "location")] == "table_top"
    assert meta[("coin", "location")] == "bin_in"
    assert meta[("picture", "location")] == "wall"
    assert meta[("table", "material")] == "wood"
    assert meta[("cup", "presence")] == "present"
    assert meta[("cup", "room")] == "main"


def test_metadata_marks_missing_tracked_entities_absent():
    meta = rebuild_metadata(sample_env())
    assert meta[("unicorn", "presence")] == "absent"
    assert ("unicorn", "location") not in meta


def test_unsupported_raised_object_floats():
    env = sample_env()
    env.placements[1] = placed("cup", 1.0, 1.9, 1.0)
    assert rebuild_metadata(env)[("cup", "location")] == "floating"


def test_rebuild_metadata_never_mutates_the_environment():
    env = sample_env()
    env.metadata = {("stale", "marker"): "yes"}
    rebuild_metadata(env)
    assert env.metadata == {("stale", "marker"): "yes"}


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def test_round_trip_preserves_every_field():
    env = sample_env()
    text = serialize_environment(env)
    back = deserialize_environment(text)
    assert back.id == env.id
    assert back.task_id == env.task_id
    assert back.trajectory_id == env.trajectory_id
    assert back.rooms == env.rooms
    assert back.doorways == env.doorways
    assert back.windows == env.windows
    assert back.objects == env.objects
    assert back.relations == env.relations
    assert back.placements == env.placements
    assert sorted(back.tracked_entities) == sorted(env.tracked_entities)
    assert back.metadata == rebuild_metadata(env)
    assert serialize_environment(back) == text


def test_serialization_is_canonical_under_attribute_order():
    a = sample_env()
    b = sample_env()
    b.objects[0] = ObjectSpec(
        id="table",
        description="a table",
        room="main",
        size=(1.0, 0.8, 1.0),
        category="task_related",
        attributes=dict(reversed(list(a.objects[0].attributes.items()))),
    )
    assert serialize_environment(a) == serialize_environment(b)


def test_float_noise_is_rounded_away():
    env = sample_env()
    env.placements[2] = placed("bin", 0.1 + 0.2 + 2.7, 0.0, 3.0)
    text = serialize_environment(env)
    assert "3.0000000000000004" not in text
    assert deserialize_environment(text).placement_of("bin").position[0] == 3.0


@pytest.mark.parametrize(
    "text",
    [
        "not json",
        "[1, 2]",
        json.dumps({"schema_version": 99}),
    ],
)
def test_deserialize_rejects_wrong_containers(text):
    with pytest.raises(SchemaViolation):
        deserialize_environment(text)


def test_deserialize_rejects_missing_fields():
    doc = json.loads(serialize_environment(sample_env()))
    del doc["task_id"]
    with pytest.raises(SchemaViolation, match="malformed"):
        deserialize_environment(json.dumps(doc))


def test_deserialize_rejects_stale_metadata():
    doc = json.loads(serialize_environment(sample_env()))
    doc["metadata"]["cup"]["location"] = "floor"
    with pytest.raises(SchemaViolation, match="metadata"):
        deserialize_environment(json.dumps(doc))


def test_bundle_environments_round_trip(built_envs):
    for env in built_envs:
        text = serialize_environment(env)
        assert serialize_environment(deserialize_environment(text)) == text
