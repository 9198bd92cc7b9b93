import json

import pytest

from conftest import SMALL_GRID
from placekit.dsl import QuerySpec
from placekit.errors import ConfigError, RetryBudgetExhaustedError
from placekit.executor import ExecutionContext, execute_program
from placekit.procgen import (
    GENERATION_COLLISION_THRESHOLD,
    build_classifier_eval_set,
    expand_template,
    generate_dataset,
    generate_scene,
    grammar_to_json,
    load_grammar,
    prefix_scene,
)
from placekit.scene import has_major_collisions, make_scene, ObjectInstance


def test_default_grammar_loads():
    grammar = load_grammar()
    assert grammar.scene_type == "bedroom"
    assert "bed" in grammar.vocabulary
    assert grammar.holds_humans("bed")
    assert not grammar.holds_humans("wardrobe")
    assert any(r.required for r in grammar.rules)


def test_grammar_round_trips_through_json():
    grammar = load_grammar()
    again = load_grammar(json.dumps(grammar_to_json(grammar)))
    assert again == grammar


def test_grammar_validation():
    doc = grammar_to_json(load_grammar())
    bad = json.loads(json.dumps(doc))
    bad["rules"][0]["category"] = "undeclared"
    with pytest.raises(ConfigError):
        load_grammar(json.dumps(bad))
    bad = json.loads(json.dumps(doc))
    bad["rules"][0]["count"] = [2, 1]
    with pytest.raises(ConfigError):
        load_grammar(json.dumps(bad))
    with pytest.raises(ConfigError):
        load_grammar("{}")


def test_expand_template_uses_latest_of_category():
    scene = make_scene("t", [(0, 0), (2.4, 0), (2.4, 2.4), (0, 2.4)], [
        ObjectInstance(id="bed_0", category="bed", size=(0.5, 0.5),
                       position=(0.5, 0.5), orientation="N"),
        ObjectInstance(id="bed_1", category="bed", size=(0.5, 0.5),
                       position=(1.5, 1.5), orientation="N"),
    ], grid=SMALL_GRID)
    assert expand_template("attach($bed, left)", scene) == "attach(bed_1, left)"
    assert expand_template("align($desk)", scene) is None


def test_expand_template_forany_builds_or_chain():
    scene = make_scene("t", [(0, 0), (2.4, 0), (2.4, 2.4), (0, 2.4)], [],
                       grid=SMALL_GRID)
    text = expand_template("forany(wall, attach($wall, up))", scene)
    # Four walls: three nested ors.
    assert text.count("or(") == 3
    assert text.count("attach(wall_") == 4
    assert expand_template("forany(bed, align($bed))", scene) is None


def test_generate_scene_is_deterministic():
    grammar = load_grammar()
    scene_a, truths_a = generate_scene(grammar, 123)
    scene_b, truths_b = generate_scene(grammar, 123)
    assert scene_a == scene_b
    assert set(truths_a) == set(truths_b)
    for oid in truths_a:
        assert truths_a[oid].program_text == truths_b[oid].program_text
        assert truths_a[oid].placement == truths_b[oid].placement
    scene_c, _ = generate_scene(grammar, 124)
    assert scene_c != scene_a


def test_generated_scene_has_bed_and_no_major_collisions():
    grammar = load_grammar()
    for seed in range(5):
        scene, truths = generate_scene(grammar, seed)
        categories = [o.category for o in scene.furniture]
        assert "bed" in categories
        assert not has_major_collisions(scene)
        assert set(truths) == {o.id for o in scene.furniture}


def test_truth_masks_contain_their_placements():
    grammar = load_grammar()
    scene, truths = generate_scene(grammar, 7)
    for truth in truths.values():
        assert truth.mask.get(*truth.placement), truth.object_id


def test_truth_mask_matches_prefix_context_execution():
    # Re-executing the recorded program text in the recorded prefix
    # context must reproduce the stored mask exactly.
    grammar = load_grammar()
    scene, truths = generate_scene(grammar, 11)
    for truth in truths.values():
        prefix = prefix_scene(scene, truth.order_index)
        obj = scene.find(truth.object_id)
        ctx = ExecutionContext(
            scene=prefix,
            query=QuerySpec(obj.category, obj.size, obj.holds_humans),
        )
        assert execute_program(truth.program, ctx) == truth.mask


def test_generation_sampling_used_disjoint_footprints():
    # The placement itself must be valid under the strict generation
    # threshold, not only under the default one.
    grammar = load_grammar()
    scene, truths = generate_scene(grammar, 19)
    for truth in truths.values():
        prefix = prefix_scene(scene, truth.order_index)
        obj = scene.find(truth.object_id)
        strict = ExecutionContext(
            scene=prefix,
            query=QuerySpec(obj.category, obj.size, obj.holds_humans),
            collision_threshold=GENERATION_COLLISION_THRESHOLD,
        )
        assert execute_program(truth.program, strict).get(*truth.placement)


def test_prefix_scene_drops_later_objects():
    grammar = load_grammar()
    scene, truths = generate_scene(grammar, 3)
    k = len(scene.furniture) // 2
    prefix = prefix_scene(scene, k)
    assert len(prefix.furniture) == k
    assert prefix.walls == scene.walls
    assert prefix.furniture == scene.furniture[:k]


def test_generate_dataset_keys_and_determinism():
    grammar = load_grammar()
    a = generate_dataset(grammar, 3, seed=5)
    b = generate_dataset(grammar, 3, seed=5)
    assert sorted(a) == ["scene_0000", "scene_0001", "scene_0002"]
    for sid in a:
        assert a[sid][0] == b[sid][0]


def test_required_rule_aborts_when_unplaceable():
    # A grammar whose only rule demands an object far too large for the
    # room exhausts its retries.
    doc = grammar_to_json(load_grammar())
    doc["categories"] = {"bed": {
        "width": [5.9, 6.0], "depth": [5.9, 6.0], "holds_humans": True}}
    doc["rules"] = [{"category": "bed", "count": [1, 1],
                     "template": "forany(wall, attach($wall, up))",
                     "required": True}]
    doc["room"] = {"min_side": 3.0, "max_side": 3.2}
    grammar = load_grammar(json.dumps(doc))
    with pytest.raises(RetryBudgetExhaustedError):
        generate_scene(grammar, 0)


def test_optional_rule_is_skipped_quietly():
    doc = grammar_to_json(load_grammar())
    doc["categories"] = {"bed": {
        "width": [5.9, 6.0], "depth": [5.9, 6.0], "holds_humans": True}}
    doc["rules"] = [{"category": "bed", "count": [1, 1],
                     "template": "forany(wall, attach($wall, up))"}]
    doc["room"] = {"min_side": 3.0, "max_side": 3.2}
    grammar = load_grammar(json.dumps(doc))
    scene, truths = generate_scene(grammar, 0)
    assert scene.furniture == ()
    assert truths == {}


def test_classifier_eval_set_labels_and_supersets(gen_dataset):
    small = {sid: gen_dataset[sid] for sid in sorted(gen_dataset)[:3]}
    entries = build_classifier_eval_set(small, seed=0)
    assert any(e.label == 1 for e in entries)
    assert any(e.label == 0 for e in entries)
    truth_by_key = {}
    for e in entries:
        if e.label == 1:
            truth_by_key[(e.scene_id, e.object_id)] = e.mask
    for e in entries:
        if e.label == 0:
            truth = truth_by_key[(e.scene_id, e.object_id)]
            # Negatives are strict supersets of the matching truth mask.
            assert (truth.bits & ~e.mask.bits).sum() == 0
            assert e.mask.popcount() > truth.popcount()
