import pytest

from conftest import SMALL_GRID
from placekit.dsl import leaves, parse_program, serialize_program
from placekit.errors import ExtractionError, UnconstrainedObjectError
from placekit.executor import completion_context, execute_program
from placekit.extraction import (
    extract_initial_program,
    extract_program,
    remove_extraneous_constraints,
    repair_null_program,
)
from placekit.scene import ObjectInstance, make_scene


def bedroom_with_stool():
    bed = ObjectInstance(id="bed_0", category="bed", size=(0.8, 1.2),
                         position=(1.2, 0.7), orientation="N", holds_humans=True)
    stool = ObjectInstance(id="stool_0", category="stool", size=(0.3, 0.3),
                           position=(0.55, 0.7), orientation="N", holds_humans=True)
    return make_scene("t", [(0, 0), (2.4, 0), (2.4, 2.4), (0, 2.4)],
                      [bed, stool], grid=SMALL_GRID)


def test_extracted_program_contains_original_placement():
    scene = bedroom_with_stool()
    for object_id in ("bed_0", "stool_0"):
        program = extract_program(scene, object_id)
        ctx, placement = completion_context(scene, object_id)
        mask = execute_program(program, ctx)
        assert mask.get(*placement), object_id


def test_extraction_finds_the_attachment():
    scene = bedroom_with_stool()
    program = extract_program(scene, "stool_0")
    refs = {c.reference for c in leaves(program.root)}
    assert "bed_0" in refs
    ctypes = {c.ctype for c in leaves(program.root)}
    assert "attach" in ctypes


def test_extraction_emits_align_for_same_orientation():
    scene = bedroom_with_stool()
    program = extract_initial_program(scene, "stool_0")
    pairs = {(c.ctype, c.reference) for c in leaves(program.root)}
    assert ("align", "bed_0") in pairs


def test_extraction_face_for_opposed_neighbors():
    # Chair faces the desk across a small gap, orientations opposed.
    desk = ObjectInstance(id="desk_0", category="desk", size=(0.7, 0.4),
                          position=(1.2, 1.5), orientation="S")
    chair = ObjectInstance(id="chair_0", category="chair", size=(0.35, 0.35),
                           position=(1.2, 1.1), orientation="N", holds_humans=True)
    scene = make_scene("t", [(0, 0), (2.4, 0), (2.4, 2.4), (0, 2.4)],
                       [desk, chair], grid=SMALL_GRID)
    program = extract_initial_program(scene, "chair_0")
    pairs = {(c.ctype, c.reference) for c in leaves(program.root)}
    assert ("face", "desk_0") in pairs
    assert ("align", "desk_0") not in pairs


def test_reach_leaves_only_for_human_support():
    # Stool within reach of the bed (holds humans) and a crate (does not).
    bed = ObjectInstance(id="bed_0", category="bed", size=(0.8, 1.2),
                         position=(1.6, 0.7), orientation="N", holds_humans=True)
    crate = ObjectInstance(id="crate_0", category="crate", size=(0.4, 0.4),
                           position=(0.3, 1.9), orientation="N")
    stool = ObjectInstance(id="stool_0", category="stool", size=(0.3, 0.3),
                           position=(0.8, 0.7), orientation="N", holds_humans=True)
    scene = make_scene("t", [(0, 0), (2.4, 0), (2.4, 2.4), (0, 2.4)],
                       [bed, crate, stool], grid=SMALL_GRID)
    program = extract_initial_program(scene, "stool_0")
    reach_refs = {c.reference for c in leaves(program.root)
                  if c.ctype == "reachable_by_arm"}
    assert "bed_0" in reach_refs
    assert "crate_0" not in reach_refs


def test_unconstrained_object_raises():
    # A lone object in the middle of a large empty room touches nothing:
    # no walls in attach range, nothing to reach.
    lone = ObjectInstance(id="lone_0", category="crate", size=(0.3, 0.3),
                          position=(1.2, 1.2), orientation="N")
    scene = make_scene("t", [(0, 0), (2.4, 0), (2.4, 2.4), (0, 2.4)],
                       [lone], grid=SMALL_GRID)
    with pytest.raises(UnconstrainedObjectError):
        extract_initial_program(scene, "lone_0")


def test_remove_extraneous_keeps_mask_identical():
    scene = bedroom_with_stool()
    ctx, placement = completion_context(scene, "stool_0")
    initial = extract_initial_program(scene, "stool_0")
    slim = remove_extraneous_constraints(initial, ctx)
    assert len(leaves(slim.root)) <= len(leaves(initial.root))
    assert execute_program(slim, ctx) == execute_program(initial, ctx)
    assert execute_program(slim, ctx).get(*placement)


def test_remove_extraneous_drops_duplicate_leaf():
    scene = bedroom_with_stool()
    ctx, _ = completion_context(scene, "stool_0")
    program = parse_program(
        "and(attach(bed_0,left),and(align(bed_0),attach(bed_0,left)))")
    slim = remove_extraneous_constraints(program, ctx)
    assert len(leaves(slim.root)) == 2
    assert execute_program(slim, ctx) == execute_program(program, ctx)


def test_repair_null_program_picks_largest_live_subtree():
    scene = bedroom_with_stool()
    ctx, placement = completion_context(scene, "stool_0")
    # A conjunction that is unsatisfiable at the placement: attach on
    # opposite sides simultaneously; the repair falls back to a subtree.
    program = parse_program(
        "and(and(attach(bed_0,left),align(bed_0)),attach(bed_0,right))")
    repaired = repair_null_program(program, ctx, placement)
    assert execute_program(repaired, ctx).get(*placement)
    assert serialize_program(repaired) == "and(attach(bed_0,left),align(bed_0))"


def test_repair_null_program_raises_when_hopeless():
    scene = bedroom_with_stool()
    ctx, _ = completion_context(scene, "stool_0")
    program = parse_program("attach(bed_0,right)")
    # A placement on the far left can never satisfy attach-on-the-right.
    with pytest.raises(ExtractionError):
        repair_null_program(program, ctx, ((0, 0), "N"))


def test_extraction_is_deterministic():
    scene = bedroom_with_stool()
    a = serialize_program(extract_program(scene, "stool_0"))
    b = serialize_program(extract_program(scene, "stool_0"))
    assert a == b
