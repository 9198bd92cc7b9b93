"""Procedural scene generator with known ground-truth programs.

Scenes come from a data-driven grammar: ordered rules, each naming a
category, a cardinality range, and a program template. A template is
ordinary program text with ``$category`` placeholders (resolved to the
most recently placed object of that category) plus one macro::

    forany(cat, TEXT)

which expands to an Or over every scene object of that category with
``$cat`` substituted, giving multimodal ground truth such as "against
any wall". Rules whose placeholders cannot resolve are skipped, which
is how optional dependent objects (a chair that needs a desk) work.

Objects are placed in rule order by executing the expanded program and
sampling one placement from its mask. Generation runs with a zero
collision threshold so footprints are strictly disjoint; downstream
consumers then cannot lose the placed cell to their own collision
filters regardless of their threshold.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, replace

import numpy as np

from .dsl import (
    PlacementProgram,
    QuerySpec,
    delete_constraint,
    leaf_count,
    parse_program,
    serialize_program,
)
from .errors import ConfigError, ExtractionError, RetryBudgetExhaustedError
from .executor import ExecutionContext, completion_context, execute_program
from .extraction import extract_program
from .geometry import DEFAULT_GRID, GridSpec
from .mask import PlacementMask, sample_placements
from .scene import ObjectInstance, Scene, make_scene, validate_scene

DEFAULT_GRAMMAR = {
    "scene_type": "bedroom",
    "room": {"min_side": 3.0, "max_side": 6.2},
    "wall_thickness": 0.10,
    "retry_budget": 20,
    "categories": {
        "bed": {"holds_humans": True, "width": [1.4, 1.8], "depth": [1.9, 2.1]},
        "nightstand": {"holds_humans": False, "width": [0.40, 0.55], "depth": [0.40, 0.50]},
        "wardrobe": {"holds_humans": False, "width": [0.8, 1.6], "depth": [0.5, 0.7]},
        "desk": {"holds_humans": False, "width": [1.0, 1.4], "depth": [0.5, 0.7]},
        "chair": {"holds_humans": True, "width": [0.45, 0.55], "depth": [0.45, 0.55]},
        "stool": {"holds_humans": True, "width": [0.35, 0.45], "depth": [0.35, 0.45]},
    },
    "rules": [
        {
            "category": "bed",
            "count": [1, 1],
            "required": True,
            "template": "forany(wall, and(attach($wall, up), align($wall)))",
        },
        {
            "category": "nightstand",
            "count": [0, 2],
            "template": (
                "or(and(attach($bed, left), align($bed)),"
                " and(attach($bed, right), align($bed)))"
            ),
        },
        {
            "category": "wardrobe",
            "count": [1, 1],
            "template": "forany(wall, and(attach($wall, up), align($wall)))",
        },
        {
            "category": "desk",
            "count": [0, 1],
            "template": "forany(wall, and(attach($wall, up), align($wall)))",
        },
        {
            "category": "chair",
            "count": [1, 1],
            "template": "and(attach($desk, up), face($desk))",
        },
        {
            "category": "stool",
            "count": [0, 1],
            "template": "or(reachable_by_arm($bed, left), reachable_by_arm($bed, right))",
        },
    ],
}

GENERATION_COLLISION_THRESHOLD = 0.0


@dataclass(frozen=True)
class GrammarRule:
    category: str
    count: tuple[int, int]
    template: str
    # Required rules abort generation when the minimum count cannot be
    # placed; optional ones are quietly skipped (their target may be
    # crowded out, like a chair whose desk ended up with no clear front).
    required: bool = False


@dataclass(frozen=True)
class Grammar:
    scene_type: str
    room_min_side: float
    room_max_side: float
    wall_thickness: float
    retry_budget: int
    categories: dict
    rules: tuple[GrammarRule, ...]

    @property
    def vocabulary(self) -> tuple[str, ...]:
        return tuple(sorted(self.categories))

    def holds_humans(self, category: str) -> bool:
        return bool(self.categories[category]["holds_humans"])


def load_grammar(data=None) -> Grammar:
    """Build a grammar from a dict, JSON text, or the built-in default."""
    if data is None:
        data = copy.deepcopy(DEFAULT_GRAMMAR)
    elif isinstance(data, (str, bytes)):
        data = json.loads(data)
    try:
        rules = tuple(
            GrammarRule(
                category=r["category"],
                count=(int(r["count"][0]), int(r["count"][1])),
                template=r["template"],
                required=bool(r.get("required", False)),
            )
            for r in data["rules"]
        )
        grammar = Grammar(
            scene_type=data["scene_type"],
            room_min_side=float(data["room"]["min_side"]),
            room_max_side=float(data["room"]["max_side"]),
            wall_thickness=float(data.get("wall_thickness", 0.10)),
            retry_budget=int(data.get("retry_budget", 20)),
            categories=data["categories"],
            rules=rules,
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise ConfigError(f"bad grammar document: {exc}") from exc
    for rule in grammar.rules:
        if rule.category not in grammar.categories:
            raise ConfigError(f"rule category {rule.category!r} not declared")
        if rule.count[0] < 0 or rule.count[1] < rule.count[0]:
            raise ConfigError(f"bad count range for {rule.category!r}")
    return grammar


def grammar_to_json(grammar: Grammar) -> dict:
    return {
        "scene_type": grammar.scene_type,
        "room": {"min_side": grammar.room_min_side, "max_side": grammar.room_max_side},
        "wall_thickness": grammar.wall_thickness,
        "retry_budget": grammar.retry_budget,
        "categories": grammar.categories,
        "rules": [
            {
                "category": r.category,
                "count": [r.count[0], r.count[1]],
                "template": r.template,
                "required": r.required,
            }
            for r in grammar.rules
        ],
    }


def _latest_of_category(scene: Scene, category: str):
    for obj in reversed(scene.objects):
        if obj.category == category:
            return obj
    return None


def expand_template(template: str, scene: Scene) -> str | None:
    """Program text with placeholders resolved, or None when unresolvable."""
    text = template
    while True:
        start = text.find("forany(")
        if start < 0:
            break
        # Find the macro's argument split and matching close paren.
        depth = 0
        comma = close = -1
        for i in range(start + len("forany("), len(text)):
            ch = text[i]
            if ch == "(":
                depth += 1
            elif ch == ")":
                if depth == 0:
                    close = i
                    break
                depth -= 1
            elif ch == "," and depth == 0 and comma < 0:
                comma = i
        if comma < 0 or close < 0:
            raise ConfigError(f"malformed forany macro in template: {template!r}")
        category = text[start + len("forany("): comma].strip()
        body = text[comma + 1: close].strip()
        matches = [o for o in scene.objects if o.category == category]
        if not matches:
            return None
        arms = [body.replace(f"${category}", obj.id) for obj in matches]
        expansion = arms[0]
        for arm in arms[1:]:
            expansion = f"or({expansion},{arm})"
        text = text[:start] + expansion + text[close + 1:]
    # Plain placeholders resolve to the most recent object of the category.
    while "$" in text:
        start = text.index("$")
        end = start + 1
        while end < len(text) and (text[end].isalnum() or text[end] == "_"):
            end += 1
        category = text[start + 1: end]
        obj = _latest_of_category(scene, category)
        if obj is None:
            return None
        text = text[:start] + obj.id + text[end:]
    return text


@dataclass(frozen=True)
class GroundTruth:
    """What the generator knew when it placed one object."""

    object_id: str
    category: str
    program_text: str
    mask: PlacementMask
    placement: tuple  # ((ix, iy), orientation)
    order_index: int

    @property
    def program(self) -> PlacementProgram:
        return parse_program(self.program_text)


def prefix_scene(scene: Scene, order_index: int) -> Scene:
    """The scene as it looked before the object at ``order_index`` was placed."""
    return replace(scene, objects=scene.walls + scene.furniture[:order_index])


def generate_scene(grammar: Grammar, seed, grid: GridSpec = DEFAULT_GRID):
    """One scene plus per-object ground truth. Deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    width = float(rng.uniform(grammar.room_min_side, grammar.room_max_side))
    height = float(rng.uniform(grammar.room_min_side, grammar.room_max_side))
    polygon = [(0.0, 0.0), (width, 0.0), (width, height), (0.0, height)]
    scene = make_scene(
        grammar.scene_type,
        polygon,
        grid=grid,
        wall_thickness=grammar.wall_thickness,
        max_side=grammar.room_max_side,
    )

    truths: dict[str, GroundTruth] = {}
    category_counts: dict[str, int] = {}
    order_index = 0
    for rule in grammar.rules:
        spec = grammar.categories[rule.category]
        count = int(rng.integers(rule.count[0], rule.count[1] + 1))
        placed_for_rule = 0
        for _ in range(count):
            placed = False
            for _attempt in range(grammar.retry_budget):
                size = (
                    float(rng.uniform(spec["width"][0], spec["width"][1])),
                    float(rng.uniform(spec["depth"][0], spec["depth"][1])),
                )
                text = expand_template(rule.template, scene)
                if text is None:
                    break
                query = QuerySpec(rule.category, size, grammar.holds_humans(rule.category))
                program = parse_program(text, query)
                # Placements are sampled at a zero collision threshold so
                # footprints stay strictly disjoint; the recorded truth
                # mask uses the standard executor semantics in the same
                # context, so downstream predictions (subsets of the rule
                # constraints under the default threshold) stay subsets
                # of the truth.
                gen_ctx = ExecutionContext(
                    scene=scene,
                    query=query,
                    collision_threshold=GENERATION_COLLISION_THRESHOLD,
                )
                sampling_mask = execute_program(program, gen_ctx)
                if sampling_mask.is_empty():
                    continue
                mask = execute_program(program, ExecutionContext(scene=scene, query=query))
                (cell, orientation) = sample_placements(sampling_mask, 1, rng)[0]
                position = scene.grid.cell_center(cell, scene.grid_origin)
                n = category_counts.get(rule.category, 0)
                obj = ObjectInstance(
                    id=f"{rule.category}_{n}",
                    category=rule.category,
                    size=size,
                    position=position,
                    orientation=orientation,
                    holds_humans=grammar.holds_humans(rule.category),
                )
                truths[obj.id] = GroundTruth(
                    object_id=obj.id,
                    category=rule.category,
                    program_text=serialize_program(program),
                    mask=mask,
                    placement=(cell, orientation),
                    order_index=order_index,
                )
                scene = scene.with_object(obj)
                category_counts[rule.category] = n + 1
                order_index += 1
                placed = True
                break
            if not placed:
                if (rule.required and placed_for_rule < rule.count[0]
                        and expand_template(rule.template, scene) is not None):
                    raise RetryBudgetExhaustedError(
                        f"could not place required {rule.category!r} (seed {seed})"
                    )
                break
            placed_for_rule += 1
    validate_scene(scene, max_side=grammar.room_max_side)
    return scene, truths


def generate_dataset(grammar: Grammar, n: int, seed, grid: GridSpec = DEFAULT_GRID):
    """n scenes keyed scene_0000.. with ground truths, deterministic in seed."""
    children = np.random.SeedSequence(seed).spawn(n)
    out = {}
    for i, child in enumerate(children):
        scene, truths = generate_scene(grammar, child, grid=grid)
        out[f"scene_{i:04d}"] = (scene, truths)
    return out


@dataclass(frozen=True)
class LabeledMask:
    """One classifier evaluation entry: a mask in context with a label."""

    scene_id: str
    object_id: str
    scene: Scene  # generation-prefix context, query removed
    query: QuerySpec
    mask: PlacementMask
    label: int  # 1 real (ground truth), 0 fake (relaxed superset)


def build_classifier_eval_set(dataset, seed, deletion_samples: int = 4,
                              **ctx_kwargs) -> list:
    """Positive = ground-truth masks; negatives = strict-superset masks of
    randomly constraint-deleted extracted programs, in the same context."""
    rng = np.random.default_rng(seed)
    entries: list[LabeledMask] = []
    for scene_id in sorted(dataset):
        scene, truths = dataset[scene_id]
        for object_id in sorted(truths, key=lambda o: truths[o].order_index):
            truth = truths[object_id]
            prefix = prefix_scene(scene, truth.order_index)
            placed = scene.find(object_id)
            prefix_with_query = prefix.with_object(placed)
            query = QuerySpec(placed.category, placed.size, placed.holds_humans)
            entries.append(
                LabeledMask(scene_id, object_id, prefix, query, truth.mask, 1)
            )
            try:
                program = extract_program(prefix_with_query, object_id, **ctx_kwargs)
            except ExtractionError:
                continue
            ctx, _ = completion_context(prefix_with_query, object_id, **ctx_kwargs)
            seen = set()
            for _ in range(deletion_samples):
                if leaf_count(program) < 2:
                    break
                index = int(rng.integers(leaf_count(program)))
                relaxed = delete_constraint(program, index)
                mask = execute_program(relaxed, ctx)
                key = mask.bits.tobytes()
                if key in seen:
                    continue
                seen.add(key)
                is_superset = bool((truth.mask.bits & ~mask.bits).sum() == 0)
                if is_superset and mask != truth.mask:
                    entries.append(
                        LabeledMask(scene_id, object_id, prefix, query, mask, 0)
                    )
    return entries
