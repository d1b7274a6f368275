"""Numeric semantics for spatial relations, shared by solver and validator.

The layout solver and the physics validator implement their geometric
predicates separately (so one cannot silently inherit the other's bugs), but
both read thresholds from this single table. Instantiate with overrides to
tune a run; the defaults below are the package-wide contract.

Distances are meters. The vertical axis is y; floors sit at y = 0; an
object's placement position is (x, y, z) with x/z the footprint center and
y the bottom face. Directions are the four cardinals in the x-z plane:
north = +z, south = -z, east = +x, west = -x.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class RelationSemantics:
    near_max: float = 1.5          # near: center distance <= near_max
    far_min: float = 3.0           # far: center distance >= far_min
    front_max: float = 2.0         # in_front_of: facing ray hits subject within front_max
    side_long_max: float = 0.5     # side_of: |offset along reference facing| <= side_long_max
    center_aligned_eps: float = 0.1  # center_aligned: centers within eps on one horizontal axis
    edge_max: float = 0.3          # edge: footprint within edge_max of a wall
    center_max: float = 0.5        # center: object center within center_max of room center
    support_eps: float = 0.01      # resting: bottom face within eps of the support's top face
    support_overlap_frac: float = 0.5  # resting: horizontal overlap >= frac of subject footprint
    mount_eps: float = 0.01        # mounted: back face within eps of the wall plane
    mount_height: float = 1.4      # default bottom height for wall-mounted objects
    wall_height: float = 3.0       # rooms have no height field; windows must fit under this


DEFAULT_SEMANTICS = RelationSemantics()

CARDINALS = ("north", "south", "east", "west")

# unit facing vectors in the (x, z) plane
DIRECTION_VECTORS = {
    "north": (0.0, 1.0),
    "south": (0.0, -1.0),
    "east": (1.0, 0.0),
    "west": (-1.0, 0.0),
}
