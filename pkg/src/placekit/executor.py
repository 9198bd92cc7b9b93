"""Program execution: constraint masks, CSG combination, collision filter.

The executor answers one question: given a scene (that does not contain
the query object) and a query object description, which (cell,
orientation) placements satisfy a program? Constraint semantics:

``attach(r, d)``
    The query sits on side ``d`` of reference ``r`` (direction in the
    reference's local frame) with a face gap in ``[-cell/2, attach_band]``
    meters. The footprints must overlap in extent along the
    perpendicular axis. Evaluated for all four query orientations.

``reachable_by_arm(r, d)``
    Same geometry with the gap in ``[reach_low, reach_high]``. The
    reference must hold humans.

``align(r)``
    Every cell of the slice matching the reference's orientation.

``face(r)``
    Set per orientation: the query's forward corridor (its full width
    extruded from its front face onward) intersects the reference
    footprint with positive area.

``execute_program`` combines raw constraint masks through the tree and
then applies the collision filter once at the root: a placement is
cleared when the rasterized query footprint overlaps any non-wall
object footprint by more than ``collision_threshold`` times the query
footprint cell count, or when any footprint cell leaves the room.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dsl import And, Constraint, Leaf, Node, Or, PlacementProgram, QuerySpec
from .errors import ExecutionError
from .geometry import (
    EPS,
    ORIENTATIONS,
    box_sum,
    footprint_cell_radius,
    local_direction,
    oriented_half_extents,
)
from .mask import PlacementMask, collapse_orientations
from .scene import Scene, furniture_occupancy, object_cells, room_interior_mask

DEFAULT_COLLISION_THRESHOLD = 0.10
DEFAULT_ATTACH_BAND = 0.15
DEFAULT_REACH_BAND = (0.15, 0.60)


@dataclass(eq=False)
class ExecutionContext:
    """Scene plus query description plus thresholds.

    The scene must not contain the query object itself. The context
    memoizes per-constraint masks and the collision validity grid, so
    share one context across candidate programs for the same entry.
    """

    scene: Scene
    query: QuerySpec
    collision_threshold: float = DEFAULT_COLLISION_THRESHOLD
    attach_band: float = DEFAULT_ATTACH_BAND
    reach_band: tuple[float, float] = DEFAULT_REACH_BAND
    _leaf_memo: dict = field(default_factory=dict, repr=False)
    _valid_memo: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if abs(self.reach_band[0] - self.attach_band) > 1e-12:
            raise ExecutionError("reach band must start where the attach band ends")
        if self.reach_band[1] <= self.reach_band[0]:
            raise ExecutionError("reach band must have positive extent")
        if self.collision_threshold < 0:
            raise ExecutionError("collision threshold must be >= 0")

    @property
    def grid(self):
        return self.scene.grid


def completion_context(scene: Scene, object_id: str, **kwargs) -> tuple[ExecutionContext, tuple]:
    """Context for re-placing an existing object.

    Removes the object from the scene, builds the context, and returns
    it together with the object's original (cell, orientation).
    """
    obj = scene.find(object_id)
    ctx = ExecutionContext(
        scene=scene.without_object(object_id),
        query=QuerySpec(category=obj.category, size=obj.size, holds_humans=obj.holds_humans),
        **kwargs,
    )
    cell = scene.grid.position_to_cell(obj.position, scene.grid_origin)
    return ctx, (cell, obj.orientation)


def _query_extents(ctx: ExecutionContext, orientation: str):
    """Per-cell query rectangle extents along each axis (1-D arrays)."""
    grid = ctx.grid
    ox, oy = ctx.scene.grid_origin
    hx, hy = oriented_half_extents(ctx.query.size, orientation)
    xs = grid.x_centers(ox)
    ys = grid.y_centers(oy)
    return (xs - hx, xs + hx), (ys - hy, ys + hy)


def _positive_overlap(lo_a, hi_a, lo_b, hi_b):
    """Elementwise: do intervals (a, b) overlap with positive length?"""
    return (hi_b > lo_a + EPS) & (lo_b < hi_a - EPS)


def _band_slice(ctx: ExecutionContext, reference, orientation: str,
                cardinal: str, lo: float, hi: float) -> np.ndarray:
    """One orientation slice of a gap-band constraint.

    ``cardinal`` is the world direction the query must lie in relative
    to the reference; ``lo``/``hi`` bound the face gap in meters.
    """
    (qx0, qx1), (qy0, qy1) = _query_extents(ctx, orientation)
    rx0, ry0, rx1, ry1 = reference.rect
    if cardinal == "N":
        gap = qy0 - ry1
        along = (lo - EPS <= gap) & (gap <= hi + EPS)
        perp = _positive_overlap(qx0, qx1, rx0, rx1)
        return np.outer(along, perp)
    if cardinal == "S":
        gap = ry0 - qy1
        along = (lo - EPS <= gap) & (gap <= hi + EPS)
        perp = _positive_overlap(qx0, qx1, rx0, rx1)
        return np.outer(along, perp)
    if cardinal == "E":
        gap = qx0 - rx1
        along = (lo - EPS <= gap) & (gap <= hi + EPS)
        perp = _positive_overlap(qy0, qy1, ry0, ry1)
        return np.outer(perp, along)
    if cardinal == "W":
        gap = rx0 - qx1
        along = (lo - EPS <= gap) & (gap <= hi + EPS)
        perp = _positive_overlap(qy0, qy1, ry0, ry1)
        return np.outer(perp, along)
    raise AssertionError(f"bad cardinal {cardinal!r}")


def _face_slice(ctx: ExecutionContext, reference, orientation: str) -> np.ndarray:
    """Forward-corridor intersection, vectorized over cells.

    Matches ``scene.corridor_hits`` applied to the query rectangle at
    every cell center for this orientation.
    """
    (qx0, qx1), (qy0, qy1) = _query_extents(ctx, orientation)
    rx0, ry0, rx1, ry1 = reference.rect
    if orientation == "N":
        span = _positive_overlap(qx0, qx1, rx0, rx1)
        ahead = ry1 > qy1 + EPS
        return np.outer(ahead, span)
    if orientation == "S":
        span = _positive_overlap(qx0, qx1, rx0, rx1)
        ahead = ry0 < qy0 - EPS
        return np.outer(ahead, span)
    if orientation == "E":
        span = _positive_overlap(qy0, qy1, ry0, ry1)
        ahead = rx1 > qx1 + EPS
        return np.outer(span, ahead)
    span = _positive_overlap(qy0, qy1, ry0, ry1)
    ahead = rx0 < qx0 - EPS
    return np.outer(span, ahead)


def eval_constraint(constraint: Constraint, ctx: ExecutionContext) -> PlacementMask:
    """Raw mask of a single constraint (no collision filtering)."""
    if constraint in ctx._leaf_memo:
        return ctx._leaf_memo[constraint]
    if not ctx.scene.has(constraint.reference):
        raise ExecutionError(f"unresolved reference {constraint.reference!r}")
    reference = ctx.scene.find(constraint.reference)
    grid = ctx.grid
    h, w = grid.height, grid.width
    bits = np.zeros((4, h, w), dtype=bool)

    if constraint.ctype == "align":
        bits[ORIENTATIONS.index(reference.orientation)] = True
    elif constraint.ctype == "face":
        for o, orientation in enumerate(ORIENTATIONS):
            bits[o] = _face_slice(ctx, reference, orientation)
    elif constraint.ctype in ("attach", "reachable_by_arm"):
        if constraint.ctype == "attach":
            lo, hi = -grid.cell_size / 2.0, ctx.attach_band
        else:
            if not reference.holds_humans:
                raise ExecutionError(
                    f"reachable_by_arm reference {reference.id!r} does not hold humans"
                )
            lo, hi = ctx.reach_band
        cardinal = local_direction(reference.orientation, constraint.direction)
        for o, orientation in enumerate(ORIENTATIONS):
            bits[o] = _band_slice(ctx, reference, orientation, cardinal, lo, hi)
    else:
        raise ExecutionError(f"unknown constraint type {constraint.ctype!r}")

    result = PlacementMask(grid, bits)
    ctx._leaf_memo[constraint] = result
    return result


def execute_raw(program: PlacementProgram, ctx: ExecutionContext) -> PlacementMask:
    """Combine constraint masks through the tree, no collision filter."""

    def walk(node: Node) -> np.ndarray:
        if isinstance(node, Leaf):
            return eval_constraint(node.constraint, ctx).bits
        if isinstance(node, And):
            return walk(node.left) & walk(node.right)
        if isinstance(node, Or):
            return walk(node.left) | walk(node.right)
        raise ExecutionError(f"unknown node {type(node).__name__}")

    return PlacementMask(ctx.grid, walk(program.root))


def collision_validity(ctx: ExecutionContext) -> np.ndarray:
    """(4, H, W) bool: placements whose footprint stays in the room and
    does not over-overlap any existing non-wall object."""
    key = "valid"
    if key in ctx._valid_memo:
        return ctx._valid_memo[key]
    grid = ctx.grid
    interior = room_interior_mask(ctx.scene)
    outside = ~interior
    furniture = ctx.scene.furniture
    occupancies = [object_cells(obj, ctx.scene) for obj in furniture]
    valid = np.zeros((4, grid.height, grid.width), dtype=bool)
    for o, orientation in enumerate(ORIENTATIONS):
        hx, hy = oriented_half_extents(ctx.query.size, orientation)
        rx = footprint_cell_radius(hx, grid.cell_size)
        ry = footprint_cell_radius(hy, grid.cell_size)
        area_cells = (2 * rx + 1) * (2 * ry + 1)
        ok = box_sum(outside.astype(np.int64), rx, ry, pad_value=1) == 0
        budget = ctx.collision_threshold * area_cells
        for occ in occupancies:
            ok &= box_sum(occ.astype(np.int64), rx, ry, pad_value=0) <= budget
        valid[o] = ok
    valid.flags.writeable = False
    ctx._valid_memo[key] = valid
    return valid


def collision_filter(mask: PlacementMask, ctx: ExecutionContext) -> PlacementMask:
    return PlacementMask(ctx.grid, mask.bits & collision_validity(ctx))


def execute_program(program: PlacementProgram, ctx: ExecutionContext) -> PlacementMask:
    """Raw combination then one collision filter at the root.

    Filtering once at the root is cellwise-equivalent to filtering every
    leaf because the filter is a cellwise conjunction.
    """
    return collision_filter(execute_raw(program, ctx), ctx)


def free_floor_mask(ctx: ExecutionContext) -> np.ndarray:
    """(H, W) bool: in-room cells not covered by any non-wall footprint."""
    return room_interior_mask(ctx.scene) & ~furniture_occupancy(ctx.scene)


def coverage_fraction(mask: PlacementMask, ctx: ExecutionContext) -> float:
    """Share of free floor cells the collapsed mask touches."""
    free = free_floor_mask(ctx)
    n_free = int(free.sum())
    if n_free == 0:
        return 1.0
    return float((collapse_orientations(mask) & free).sum()) / n_free
