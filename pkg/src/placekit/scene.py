"""Scenes: a rectilinear room, its derived wall objects, and furniture.

A scene file stores the room polygon and the furniture. Walls are never
serialized; they are derived from the polygon on load, one wall object
per polygon edge, so that constraint programs can reference them like
any other object. Heights do not exist in this model: every object is
grounded and a footprint is an oriented rectangle on the floor plane.
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import SceneError
from .geometry import (
    DEFAULT_GRID,
    EPS,
    GridSpec,
    ORIENTATIONS,
    cells_in_box,
    ensure_ccw,
    local_direction,
    opposite_orientation,
    orientation_vector,
    oriented_half_extents,
    point_in_polygon,
    points_in_polygon,
    polygon_bbox,
    rect_from_center,
    rect_overlap_area,
)

DEFAULT_MAX_SIDE = 6.2
DEFAULT_WALL_THICKNESS = 0.10
WALL_CATEGORY = "wall"


@dataclass(frozen=True)
class ObjectInstance:
    """One placed object.

    ``size`` is (width, depth) in the object's own frame: width spans x
    and depth spans y when the object faces N. ``position`` is the
    footprint centroid in world meters.
    """

    id: str
    category: str
    size: tuple[float, float]
    position: tuple[float, float]
    orientation: str
    holds_humans: bool = False
    is_wall: bool = False

    def __post_init__(self):
        if self.orientation not in ORIENTATIONS:
            raise SceneError(f"object {self.id!r}: bad orientation {self.orientation!r}")
        if self.size[0] <= 0 or self.size[1] <= 0:
            raise SceneError(f"object {self.id!r}: non-positive size")
        if self.is_wall and self.holds_humans:
            raise SceneError(f"wall {self.id!r} cannot hold humans")

    @property
    def half_extents(self) -> tuple[float, float]:
        return oriented_half_extents(self.size, self.orientation)

    @property
    def rect(self) -> tuple[float, float, float, float]:
        hx, hy = self.half_extents
        return rect_from_center(self.position, hx, hy)

    @property
    def footprint_area(self) -> float:
        return self.size[0] * self.size[1]


def derive_walls(room_polygon, wall_thickness: float = DEFAULT_WALL_THICKNESS):
    """One wall object per polygon edge.

    The wall faces the room (orientation is the inward normal), its
    width is the edge length and its depth is the wall thickness, so the
    wall slab straddles the polygon edge symmetrically.
    """
    vertices = ensure_ccw(room_polygon)
    walls = []
    n = len(vertices)
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        dx, dy = x1 - x0, y1 - y0
        if abs(dx) > EPS and abs(dy) > EPS:
            raise SceneError("room polygon must be rectilinear (axis-aligned edges)")
        length = abs(dx) + abs(dy)
        if length <= EPS:
            raise SceneError("room polygon has a zero-length edge")
        # Inward normal of a CCW polygon edge is the left normal.
        if abs(dx) > EPS:
            normal = "N" if dx > 0 else "S"
        else:
            normal = "W" if dy > 0 else "E"
        midpoint = ((x0 + x1) / 2.0, (y0 + y1) / 2.0)
        walls.append(
            ObjectInstance(
                id=f"wall_{i}",
                category=WALL_CATEGORY,
                size=(length, wall_thickness),
                position=midpoint,
                orientation=normal,
                holds_humans=False,
                is_wall=True,
            )
        )
    return tuple(walls)


@dataclass(frozen=True)
class Scene:
    """Immutable scene value. Mutators return new scenes."""

    scene_type: str
    room_polygon: tuple[tuple[float, float], ...]
    objects: tuple[ObjectInstance, ...] = field(default_factory=tuple)
    grid: GridSpec = DEFAULT_GRID

    def __post_init__(self):
        object.__setattr__(self, "room_polygon", tuple(tuple(v) for v in self.room_polygon))
        object.__setattr__(self, "objects", tuple(self.objects))
        if len(self.room_polygon) < 4:
            raise SceneError("room polygon needs at least 4 vertices")
        seen = set()
        for obj in self.objects:
            if obj.id in seen:
                raise SceneError(f"duplicate object id {obj.id!r}")
            seen.add(obj.id)

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        return polygon_bbox(self.room_polygon)

    @property
    def grid_origin(self) -> tuple[float, float]:
        x0, y0, _, _ = self.bbox
        return (x0, y0)

    @property
    def furniture(self) -> tuple[ObjectInstance, ...]:
        return tuple(o for o in self.objects if not o.is_wall)

    @property
    def walls(self) -> tuple[ObjectInstance, ...]:
        return tuple(o for o in self.objects if o.is_wall)

    def find(self, object_id: str) -> ObjectInstance:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        raise SceneError(f"no object {object_id!r} in scene")

    def has(self, object_id: str) -> bool:
        return any(o.id == object_id for o in self.objects)

    def with_object(self, obj: ObjectInstance) -> "Scene":
        return replace(self, objects=self.objects + (obj,))

    def without_object(self, object_id: str) -> "Scene":
        if not self.has(object_id):
            raise SceneError(f"no object {object_id!r} in scene")
        return replace(self, objects=tuple(o for o in self.objects if o.id != object_id))


def validate_scene(scene: Scene, max_side: float = DEFAULT_MAX_SIDE,
                   vocabulary=None) -> Scene:
    """Full validation; returns the scene for chaining, raises SceneError."""
    x0, y0, x1, y1 = scene.bbox
    if (x1 - x0) > max_side + EPS or (y1 - y0) > max_side + EPS:
        raise SceneError(
            f"room bounding box {x1 - x0:.2f} x {y1 - y0:.2f} exceeds max side {max_side}"
        )
    span_x, span_y = scene.grid.span
    if span_x + EPS < (x1 - x0) or span_y + EPS < (y1 - y0):
        raise SceneError("grid does not cover the room bounding box")
    # Rectilinear + simple enough for our purposes: derive_walls raises on
    # non-axis-aligned edges; repeated vertices are caught there too.
    derive_walls(scene.room_polygon)
    for obj in scene.furniture:
        if vocabulary is not None and obj.category not in vocabulary:
            raise SceneError(f"object {obj.id!r}: unknown category {obj.category!r}")
        if not point_in_polygon(obj.position[0], obj.position[1], scene.room_polygon):
            raise SceneError(f"object {obj.id!r} outside room")
    return scene


def make_scene(scene_type: str, room_polygon, objects=(), grid: GridSpec = DEFAULT_GRID,
               wall_thickness: float = DEFAULT_WALL_THICKNESS,
               max_side: float = DEFAULT_MAX_SIDE, vocabulary=None) -> Scene:
    """Build and validate a scene, deriving walls from the polygon."""
    walls = derive_walls(room_polygon, wall_thickness)
    scene = Scene(
        scene_type=scene_type,
        room_polygon=tuple(tuple(v) for v in room_polygon),
        objects=walls + tuple(objects),
        grid=grid,
    )
    return validate_scene(scene, max_side=max_side, vocabulary=vocabulary)


def load_scene(data, grid: GridSpec = DEFAULT_GRID,
               wall_thickness: float = DEFAULT_WALL_THICKNESS,
               max_side: float = DEFAULT_MAX_SIDE, vocabulary=None) -> Scene:
    """Parse a scene from a dict (or JSON text). Walls are derived, never read."""
    if isinstance(data, (str, bytes)):
        data = json.loads(data)
    if not isinstance(data, dict):
        raise SceneError("scene document must be a JSON object")
    for key in ("scene_type", "room", "objects"):
        if key not in data:
            raise SceneError(f"scene document missing {key!r}")
    unknown = set(data) - {"scene_type", "room", "objects"}
    if unknown:
        raise SceneError(f"unknown scene keys: {sorted(unknown)}")
    room = data["room"]
    if not isinstance(room, list) or any(len(v) != 2 for v in room):
        raise SceneError("room must be a list of [x, y] vertices")
    objects = []
    for entry in data["objects"]:
        missing = {"id", "category", "size", "position", "orientation"} - set(entry)
        if missing:
            raise SceneError(f"object entry missing {sorted(missing)}")
        if entry["category"] == WALL_CATEGORY:
            raise SceneError("walls are derived from the room polygon, not stored")
        objects.append(
            ObjectInstance(
                id=str(entry["id"]),
                category=str(entry["category"]),
                size=(float(entry["size"][0]), float(entry["size"][1])),
                position=(float(entry["position"][0]), float(entry["position"][1])),
                orientation=str(entry["orientation"]),
                holds_humans=bool(entry.get("holds_humans", False)),
            )
        )
    return make_scene(
        scene_type=str(data["scene_type"]),
        room_polygon=[(float(v[0]), float(v[1])) for v in room],
        objects=objects,
        grid=grid,
        wall_thickness=wall_thickness,
        max_side=max_side,
        vocabulary=vocabulary,
    )


def serialize_scene(scene: Scene) -> dict:
    """Plain-dict form of a scene; excludes derived walls."""
    return {
        "scene_type": scene.scene_type,
        "room": [[v[0], v[1]] for v in scene.room_polygon],
        "objects": [
            {
                "id": o.id,
                "category": o.category,
                "size": [o.size[0], o.size[1]],
                "position": [o.position[0], o.position[1]],
                "orientation": o.orientation,
                "holds_humans": o.holds_humans,
            }
            for o in scene.furniture
        ],
    }


def scene_to_json(scene: Scene) -> str:
    return json.dumps(serialize_scene(scene), sort_keys=True, separators=(",", ":"))


def rasterize_footprint(obj: ObjectInstance, centroid_cell: tuple[int, int],
                        orientation: str, grid: GridSpec) -> set[tuple[int, int]]:
    """Cells covered by the object's footprint centered on a cell.

    A cell is covered when its center lies inside the oriented bounding
    box centered at the centroid cell's center. Cells outside the grid
    are clipped away.
    """
    hx, hy = oriented_half_extents(obj.size, orientation)
    center = grid.cell_center(centroid_cell, (0.0, 0.0))
    return cells_in_box(rect_from_center(center, hx, hy), grid, (0.0, 0.0))


@functools.lru_cache(maxsize=512)
def room_interior_mask(scene: Scene) -> np.ndarray:
    """(H, W) bool: cell centers inside the room polygon. Read-only."""
    ox, oy = scene.grid_origin
    xs = scene.grid.x_centers(ox)[np.newaxis, :]
    ys = scene.grid.y_centers(oy)[:, np.newaxis]
    inside = points_in_polygon(xs, ys, scene.room_polygon)
    inside.flags.writeable = False
    return inside


def object_cells(obj: ObjectInstance, scene: Scene) -> np.ndarray:
    """(H, W) bool occupancy of one object's rasterized footprint."""
    grid = scene.grid
    occ = np.zeros((grid.height, grid.width), dtype=bool)
    for ix, iy in cells_in_box(obj.rect, grid, scene.grid_origin):
        occ[iy, ix] = True
    return occ


@functools.lru_cache(maxsize=512)
def furniture_occupancy(scene: Scene) -> np.ndarray:
    """(H, W) bool: union of rasterized non-wall footprints. Read-only."""
    grid = scene.grid
    occ = np.zeros((grid.height, grid.width), dtype=bool)
    for obj in scene.furniture:
        occ |= object_cells(obj, scene)
    occ.flags.writeable = False
    return occ


def pairwise_overlap_fraction(a: ObjectInstance, b: ObjectInstance) -> float:
    """Overlap area as a fraction of the smaller footprint."""
    area = rect_overlap_area(a.rect, b.rect)
    if area <= 0.0:
        return 0.0
    return area / min(a.footprint_area, b.footprint_area)


def has_major_collisions(scene: Scene, threshold: float = 0.2) -> bool:
    """True when any furniture pair overlaps more than ``threshold`` of
    the smaller footprint. Scenes like this are rejected before program
    extraction."""
    furniture = scene.furniture
    for i in range(len(furniture)):
        for j in range(i + 1, len(furniture)):
            if pairwise_overlap_fraction(furniture[i], furniture[j]) > threshold:
                return True
    return False


def facing_direction_of(reference: ObjectInstance, query_position: tuple[float, float]) -> str:
    """Local direction (up/down/left/right) from the reference toward a point.

    Picks the axis with the larger displacement in the reference's frame.
    """
    dx = query_position[0] - reference.position[0]
    dy = query_position[1] - reference.position[1]
    if abs(dx) >= abs(dy):
        cardinal = "E" if dx >= 0 else "W"
    else:
        cardinal = "N" if dy >= 0 else "S"
    for direction in ("up", "right", "down", "left"):
        if local_direction(reference.orientation, direction) == cardinal:
            return direction
    raise AssertionError("unreachable")


def corridor_hits(source_rect, source_orientation: str, target_rect) -> bool:
    """Does the forward corridor of ``source_rect`` intersect ``target_rect``?

    The corridor is the strip of the source's full extent perpendicular
    to its facing direction, extruded from its front face onward.
    Intersections must have positive area.
    """
    vx, vy = orientation_vector(source_orientation)
    sx0, sy0, sx1, sy1 = source_rect
    tx0, ty0, tx1, ty1 = target_rect
    if vx == 0:
        # Facing north or south: corridor spans the source's x extent.
        if not (tx1 > sx0 + EPS and tx0 < sx1 - EPS):
            return False
        if vy > 0:
            return ty1 > sy1 + EPS
        return ty0 < sy0 - EPS
    if not (ty1 > sy0 + EPS and ty0 < sy1 - EPS):
        return False
    if vx > 0:
        return tx1 > sx1 + EPS
    return tx0 < sx0 - EPS


def objects_face_each_other(a: ObjectInstance, b: ObjectInstance) -> bool:
    """Opposite cardinals and each one's forward corridor hits the other."""
    if a.orientation != opposite_orientation(b.orientation):
        return False
    return corridor_hits(a.rect, a.orientation, b.rect) and corridor_hits(
        b.rect, b.orientation, a.rect
    )
