"""Most-restrictive program extraction from observed placements.

Given a scene and one object in it (the query), extraction removes the
query from the scene and derives the conjunction of every constraint
the query's observed placement satisfies:

* every reference within attachment distance along some side yields an
  ``attach`` leaf; if the reference shares the query's orientation an
  ``align`` leaf is added, otherwise a ``face`` leaf when the two
  objects face each other (opposite cardinals, mutual forward-corridor
  hits);
* when the query holds humans the same scan runs at reaching distance,
  adding ``reachable_by_arm`` leaves for references that hold humans.

Applicability of a band leaf is decided by the executor itself: the
leaf is kept iff its mask is set at the query's original (cell,
orientation). That makes the soundness guarantee structural: an And of
bits that are set stays set, so the extracted program's mask contains
the original placement unless the collision filter removes it, in which
case the subtree repair kicks in.
"""

from __future__ import annotations

import dataclasses
import math

from .dsl import (
    Constraint,
    Leaf,
    PlacementProgram,
    and_join,
    delete_constraint,
    enumerate_subtrees,
    leaf_count,
    leaves,
)
from .errors import ExtractionError, UnconstrainedObjectError
from .executor import ExecutionContext, completion_context, eval_constraint, execute_program
from .geometry import DIRECTIONS
from .scene import Scene, objects_face_each_other

# References farther than this from the query centroid are never
# constraint candidates; generous versus the widest band.
NEIGHBOR_RADIUS_SLACK = 1.0


def _center_distance(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def _band_leaves(ctx: ExecutionContext, placement, references, ctype: str) -> list:
    """Band leaves of one type whose mask is set at the placement."""
    cell, orientation = placement
    found = []
    for ref in references:
        for direction in DIRECTIONS:
            constraint = Constraint(ctype=ctype, reference=ref.id, direction=direction)
            if eval_constraint(constraint, ctx).get(cell, orientation):
                found.append((ref, constraint))
    return found


def extract_initial_program(scene: Scene, object_id: str,
                            **ctx_kwargs) -> PlacementProgram:
    """Most-restrictive conjunction for one object's observed placement.

    Returns a program whose executed mask (in the scene-minus-query
    context) contains the object's original (cell, orientation).
    Raises UnconstrainedObjectError when nothing applies.
    """
    query_obj = scene.find(object_id)
    ctx, placement = completion_context(scene, object_id, **ctx_kwargs)
    cell, orientation = placement

    reach_high = ctx.reach_band[1]
    nearby = [
        obj
        for obj in ctx.scene.objects
        if _center_distance(obj.position, query_obj.position)
        <= reach_high + max(obj.size) + max(query_obj.size) + NEIGHBOR_RADIUS_SLACK
    ]

    # The pose used everywhere below is the snapped placement, so leaf
    # applicability and executor semantics agree exactly.
    snapped_center = scene.grid.cell_center(cell, scene.grid_origin)
    snapped_query = dataclasses.replace(
        query_obj, position=snapped_center, orientation=orientation
    )

    constraints: list[Constraint] = []
    attach_pairs = _band_leaves(ctx, placement, nearby, "attach")
    attached_ids = set()
    for ref, constraint in attach_pairs:
        constraints.append(constraint)
        attached_ids.add(ref.id)
    for ref in nearby:
        if ref.id not in attached_ids:
            continue
        if ref.orientation == orientation:
            constraints.append(Constraint(ctype="align", reference=ref.id))
        elif objects_face_each_other(snapped_query, ref):
            constraints.append(Constraint(ctype="face", reference=ref.id))

    if query_obj.holds_humans:
        reach_refs = [obj for obj in nearby if obj.holds_humans]
        for _, constraint in _band_leaves(ctx, placement, reach_refs, "reachable_by_arm"):
            constraints.append(constraint)

    if not constraints:
        raise UnconstrainedObjectError(
            f"no constraint found for object {object_id!r}"
        )

    program = and_join(
        [PlacementProgram(root=Leaf(c), query=ctx.query) for c in constraints]
    )
    mask = execute_program(program, ctx)
    if not mask.get(cell, orientation):
        program = repair_null_program(program, ctx, placement)
    return program


def repair_null_program(program: PlacementProgram, ctx: ExecutionContext,
                        placement) -> PlacementProgram:
    """Largest subtree whose mask still contains the original placement.

    Subtrees are tried in decreasing leaf count (pre-order for ties);
    the first whose executed mask is nonempty and contains the placement
    wins. Raises ExtractionError when none does.
    """
    cell, orientation = placement
    subtrees = enumerate_subtrees(program)
    order = sorted(range(len(subtrees)),
                   key=lambda i: (-len(leaves(subtrees[i].root)), i))
    for i in order:
        candidate = subtrees[i]
        mask = execute_program(candidate, ctx)
        if not mask.is_empty() and mask.get(cell, orientation):
            return candidate
    raise ExtractionError("no subtree contains the original placement")


def remove_extraneous_constraints(program: PlacementProgram,
                                  ctx: ExecutionContext) -> PlacementProgram:
    """Greedy fixpoint deletion of leaves that do not change the mask.

    Leaves are scanned left to right; any deletion that leaves the
    executed mask bit-identical is committed and the scan restarts.
    """
    target = execute_program(program, ctx)
    changed = True
    while changed and leaf_count(program) >= 2:
        changed = False
        for index in range(leaf_count(program)):
            candidate = delete_constraint(program, index)
            if execute_program(candidate, ctx) == target:
                program = candidate
                changed = True
                break
    return program


def extract_program(scene: Scene, object_id: str, **ctx_kwargs) -> PlacementProgram:
    """Extraction pipeline: initial conjunction, then extraneous removal."""
    program = extract_initial_program(scene, object_id, **ctx_kwargs)
    ctx, _ = completion_context(scene, object_id, **ctx_kwargs)
    return remove_extraneous_constraints(program, ctx)
