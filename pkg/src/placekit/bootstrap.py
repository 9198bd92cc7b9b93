"""Self-training loop over extracted placement programs.

A program dataset pairs scenes with one program per placed object.
Each iteration rewrites a random subset of those programs: candidate
programs are proposed (retrieved from similar scenes, sampled from a
leaf prior, or relaxed by deleting constraints), executed, split into
single-orientation pieces, scored by the placement classifier, and the
best piece per orientation is kept. The union of winning pieces
replaces the entry when every piece clears the score threshold gate.
Iterations never mutate their input dataset; they return a new one.
"""

from __future__ import annotations

import dataclasses
import json
import os
import zlib

import numpy as np

from .classifier import LogisticModel, score_mask
from .dsl import (
    PlacementProgram,
    QuerySpec,
    delete_constraint,
    enumerate_subtrees,
    leaf_count,
    leaves,
    map_references,
    or_join,
    and_join,
    parse_program,
    referenced_ids,
    serialize_program,
    Leaf,
    Constraint,
)
from .errors import ExecutionError, ExtractionError, UnconstrainedObjectError, ValidationError
from .executor import ExecutionContext, completion_context, coverage_fraction, execute_program
from .extraction import extract_program
from .geometry import ORIENTATIONS
from .mask import collapse_orientations, compare_masks
from .scene import Scene, load_scene, scene_to_json


@dataclasses.dataclass(frozen=True)
class BootstrapConfig:
    subset_fraction: float = 0.25
    n_relax: int = 8
    max_coverage: float = 0.5
    m_samples: int = 10
    score_threshold: float = 0.6
    proposer_k: int = 4
    prior_k: int = 2


@dataclasses.dataclass(frozen=True)
class ProgramEntry:
    scene_id: str
    object_id: str
    program_text: str
    provenance: str = "extracted"


@dataclasses.dataclass(frozen=True)
class ProgramDataset:
    """Immutable snapshot of scenes plus one program per object."""

    scenes: dict
    entries: dict
    iteration: int = 0
    metrics_history: tuple = ()

    def query_for(self, scene_id: str, object_id: str) -> QuerySpec:
        obj = self.scenes[scene_id].find(object_id)
        return QuerySpec(obj.category, obj.size, obj.holds_humans)

    def program_for(self, scene_id: str, object_id: str) -> PlacementProgram:
        entry = self.entries[(scene_id, object_id)]
        return parse_program(entry.program_text, self.query_for(scene_id, object_id))

    def with_entries(self, new_entries: dict, iteration: int,
                     metrics=None) -> "ProgramDataset":
        history = self.metrics_history
        if metrics is not None:
            history = history + (metrics,)
        return ProgramDataset(
            scenes=self.scenes,
            entries=new_entries,
            iteration=iteration,
            metrics_history=history,
        )

    def save(self, directory: str) -> None:
        os.makedirs(os.path.join(directory, "scenes"), exist_ok=True)
        grid = None
        for scene_id in sorted(self.scenes):
            scene = self.scenes[scene_id]
            if grid is None:
                grid = scene.grid
            elif grid != scene.grid:
                raise ValidationError("dataset scenes must share one grid")
            path = os.path.join(directory, "scenes", f"{scene_id}.json")
            _write_atomic(path, scene_to_json(scene))
        for (scene_id, object_id), entry in sorted(self.entries.items()):
            pdir = os.path.join(directory, "programs", scene_id)
            os.makedirs(pdir, exist_ok=True)
            _write_atomic(os.path.join(pdir, f"{object_id}.prog"), entry.program_text)
        manifest = {
            "iteration": self.iteration,
            "metrics_history": list(self.metrics_history),
            "grid": {
                "width": grid.width,
                "height": grid.height,
                "cell_size": grid.cell_size,
            } if grid is not None else None,
            "provenance": {
                f"{sid}/{oid}": entry.provenance
                for (sid, oid), entry in sorted(self.entries.items())
            },
        }
        _write_atomic(
            os.path.join(directory, "manifest.json"),
            json.dumps(manifest, sort_keys=True, separators=(",", ":")),
        )

    @classmethod
    def load(cls, directory: str) -> "ProgramDataset":
        from .geometry import GridSpec, DEFAULT_GRID

        with open(os.path.join(directory, "manifest.json"), encoding="utf-8") as fh:
            manifest = json.load(fh)
        grid = DEFAULT_GRID
        if manifest.get("grid"):
            g = manifest["grid"]
            grid = GridSpec(width=g["width"], height=g["height"], cell_size=g["cell_size"])
        scenes = {}
        scene_dir = os.path.join(directory, "scenes")
        for name in sorted(os.listdir(scene_dir)):
            if not name.endswith(".json"):
                continue
            with open(os.path.join(scene_dir, name), encoding="utf-8") as fh:
                scenes[name[:-5]] = load_scene(fh.read(), grid=grid)
        entries = {}
        provenance = manifest.get("provenance", {})
        program_dir = os.path.join(directory, "programs")
        for scene_id in sorted(os.listdir(program_dir)):
            sdir = os.path.join(program_dir, scene_id)
            for name in sorted(os.listdir(sdir)):
                if not name.endswith(".prog"):
                    continue
                object_id = name[:-5]
                with open(os.path.join(sdir, name), encoding="utf-8") as fh:
                    text = fh.read().strip()
                entries[(scene_id, object_id)] = ProgramEntry(
                    scene_id=scene_id,
                    object_id=object_id,
                    program_text=text,
                    provenance=provenance.get(f"{scene_id}/{object_id}", "extracted"),
                )
        return cls(
            scenes=scenes,
            entries=entries,
            iteration=int(manifest.get("iteration", 0)),
            metrics_history=tuple(manifest.get("metrics_history", ())),
        )


def _write_atomic(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def build_program_dataset(generated) -> ProgramDataset:
    """Extract an initial program for every object of generated scenes.

    ``generated`` maps scene id to ``(scene, truths)``. Objects whose
    extraction fails are skipped rather than aborting the build.
    """
    scenes = {}
    entries = {}
    for scene_id in sorted(generated):
        scene, truths = generated[scene_id]
        scenes[scene_id] = scene
        for object_id in sorted(truths):
            try:
                program = extract_program(scene, object_id)
            except (UnconstrainedObjectError, ExtractionError):
                continue
            entries[(scene_id, object_id)] = ProgramEntry(
                scene_id=scene_id,
                object_id=object_id,
                program_text=serialize_program(program),
            )
    return ProgramDataset(scenes=scenes, entries=entries)


class RetrievalProposer:
    """Proposes programs by transplanting them from similar scenes.

    The index keys each training entry by room dimensions, per-category
    object counts, and query size. Proposals come from the nearest
    same-category entries with their references remapped onto the
    target scene: walls map to the wall with the same orientation, and
    furniture maps to the same-category object closest in normalized
    room position. Entries that cannot be remapped are skipped.
    """

    def __init__(self, categories):
        self.categories = tuple(sorted(categories))
        self._records = []

    def _scene_features(self, scene: Scene, query: QuerySpec) -> np.ndarray:
        bx0, by0, bx1, by1 = scene.bbox
        counts = {c: 0 for c in self.categories}
        for obj in scene.furniture:
            if obj.category in counts:
                counts[obj.category] += 1
        vec = [bx1 - bx0, by1 - by0]
        vec.extend(counts[c] for c in self.categories)
        vec.extend(query.size)
        return np.asarray(vec, dtype=np.float64)

    @staticmethod
    def _norm_pos(scene: Scene, position) -> tuple[float, float]:
        bx0, by0, bx1, by1 = scene.bbox
        return (
            (position[0] - bx0) / max(bx1 - bx0, 1e-9),
            (position[1] - by0) / max(by1 - by0, 1e-9),
        )

    def fit(self, dataset: ProgramDataset) -> "RetrievalProposer":
        self._records = []
        for (scene_id, object_id) in sorted(dataset.entries):
            scene = dataset.scenes[scene_id]
            query = dataset.query_for(scene_id, object_id)
            program = dataset.program_for(scene_id, object_id)
            context = scene.without_object(object_id)
            refs = {}
            ok = True
            for ref in referenced_ids(program):
                obj = context.find(ref) if context.has(ref) else None
                if obj is None:
                    ok = False
                    break
                refs[ref] = (obj.category, obj.is_wall, obj.orientation,
                             self._norm_pos(scene, obj.position))
            if not ok:
                continue
            self._records.append({
                "scene_id": scene_id,
                "object_id": object_id,
                "category": query.category,
                "features": self._scene_features(context, query),
                "text": dataset.entries[(scene_id, object_id)].program_text,
                "refs": refs,
            })
        return self

    def _remap(self, record, scene: Scene, query: QuerySpec):
        program = parse_program(record["text"], query)
        mapping = {}
        for ref, (category, is_wall, orientation, npos) in record["refs"].items():
            if is_wall:
                matches = [w for w in scene.walls if w.orientation == orientation]
                if not matches:
                    return None
                mapping[ref] = min(matches, key=lambda w: w.id).id
                continue
            candidates = [o for o in scene.furniture if o.category == category]
            if not candidates:
                return None
            def distance(obj):
                tx, ty = self._norm_pos(scene, obj.position)
                return ((tx - npos[0]) ** 2 + (ty - npos[1]) ** 2, obj.id)
            mapping[ref] = min(candidates, key=distance).id
        remapped = map_references(program, mapping)
        for constraint in leaves(remapped.root):
            obj = scene.find(constraint.reference)
            if constraint.ctype == "reachable_by_arm" and not obj.holds_humans:
                return None
        return remapped

    def propose(self, scene: Scene, query: QuerySpec, k: int, exclude=None):
        """Up to ``k`` remapped programs, nearest index entries first."""
        scored = []
        target = self._scene_features(scene, query)
        for record in self._records:
            if record["category"] != query.category:
                continue
            if exclude is not None and (record["scene_id"], record["object_id"]) == exclude:
                continue
            dist = float(np.linalg.norm(record["features"] - target))
            scored.append((dist, record["scene_id"], record["object_id"], record))
        scored.sort(key=lambda item: item[:3])
        out = []
        seen = set()
        for _, _, _, record in scored:
            if len(out) >= k:
                break
            remapped = self._remap(record, scene, query)
            if remapped is None:
                continue
            text = serialize_program(remapped)
            if text in seen:
                continue
            seen.add(text)
            out.append(remapped)
        return out


class PriorSampler:
    """Draws fresh programs from empirical leaf statistics.

    Leaf count and (type, direction) frequencies are tallied from the
    dataset programs; references are drawn uniformly from the eligible
    objects of the target scene.
    """

    def __init__(self):
        self._leaf_freq = []
        self._count_freq = []

    def fit(self, dataset: ProgramDataset) -> "PriorSampler":
        leaf_counter = {}
        count_counter = {}
        for key in sorted(dataset.entries):
            program = parse_program(dataset.entries[key].program_text)
            constraints = leaves(program.root)
            count_counter[len(constraints)] = count_counter.get(len(constraints), 0) + 1
            for c in constraints:
                sig = (c.ctype, c.direction)
                leaf_counter[sig] = leaf_counter.get(sig, 0) + 1
        self._leaf_freq = sorted(leaf_counter.items())
        self._count_freq = sorted(count_counter.items())
        return self

    @staticmethod
    def _weighted_choice(rng, items):
        total = sum(weight for _, weight in items)
        probs = [weight / total for _, weight in items]
        index = rng.choice(len(items), p=probs)
        return items[index][0]

    def propose(self, scene: Scene, query: QuerySpec, k: int, rng):
        if not self._leaf_freq:
            return []
        out = []
        seen = set()
        for _ in range(k * 3):
            if len(out) >= k:
                break
            n_leaves = min(self._weighted_choice(rng, self._count_freq), 4)
            parts = []
            ok = True
            for _ in range(n_leaves):
                ctype, direction = self._weighted_choice(rng, self._leaf_freq)
                if ctype == "reachable_by_arm":
                    pool = [o for o in scene.objects if o.holds_humans]
                else:
                    pool = list(scene.objects)
                if not pool:
                    ok = False
                    break
                ref = pool[int(rng.integers(len(pool)))]
                parts.append(PlacementProgram(
                    root=Leaf(Constraint(ctype=ctype, reference=ref.id,
                                         direction=direction)),
                    query=query,
                ))
            if not ok or not parts:
                continue
            program = and_join(parts)
            program = PlacementProgram(root=program.root, query=query)
            text = serialize_program(program)
            if text in seen:
                continue
            seen.add(text)
            out.append(program)
        return out


def generate_candidates(original: PlacementProgram, proposals, rng,
                        n_relax: int = 8):
    """Candidate programs: the original, proposals, and relaxations.

    Each source program also contributes up to ``n_relax`` random
    single-constraint deletions. Duplicates (by serialization) are
    dropped, keeping first occurrence order.
    """
    out = []
    seen = set()

    def push(program):
        text = serialize_program(program)
        if text not in seen:
            seen.add(text)
            out.append(program)

    sources = [original] + list(proposals)
    for source in sources:
        push(source)
    for source in sources:
        n = leaf_count(source)
        if n < 2:
            continue
        for _ in range(n_relax):
            index = int(rng.integers(n))
            push(delete_constraint(source, index))
    return out


@dataclasses.dataclass(frozen=True)
class ScoredCandidate:
    program: PlacementProgram
    text: str
    mask: object
    orientation: str
    area: int
    score: float = float("nan")


def filter_and_split(candidates, ctx: ExecutionContext,
                     max_coverage: float = 0.5):
    """Reduce candidates to unique single-orientation pieces.

    Multi-orientation masks are split by re-executing every rooted
    subtree and keeping those that light up exactly one orientation.
    Pieces that execute empty, exceed the free-floor coverage cap, or
    duplicate an earlier piece's mask are dropped.
    """
    pieces = []
    seen_masks = set()
    for candidate in candidates:
        expanded = [candidate]
        try:
            mask = execute_program(candidate, ctx)
        except ExecutionError:
            continue
        active = mask.nonempty_orientations()
        if len(active) > 1:
            expanded = enumerate_subtrees(candidate)[1:]
        elif not active:
            continue
        for piece in expanded:
            try:
                piece_mask = execute_program(piece, ctx)
            except ExecutionError:
                continue
            active = piece_mask.nonempty_orientations()
            if len(active) != 1:
                continue
            if coverage_fraction(piece_mask, ctx) > max_coverage:
                continue
            key = piece_mask.bits.tobytes()
            if key in seen_masks:
                continue
            seen_masks.add(key)
            pieces.append(ScoredCandidate(
                program=piece,
                text=serialize_program(piece),
                mask=piece_mask,
                orientation=active[0],
                area=piece_mask.popcount(),
            ))
    return pieces


def _candidate_seed(seed: int, iteration: int, scene_id: str, object_id: str,
                    text: str) -> np.random.SeedSequence:
    return np.random.SeedSequence([
        seed,
        iteration,
        zlib.crc32(scene_id.encode()),
        zlib.crc32(object_id.encode()),
        zlib.crc32(text.encode()),
    ])


def combine_candidates(pieces, original: PlacementProgram, model: LogisticModel,
                       ctx: ExecutionContext, cfg: BootstrapConfig,
                       seed: int, iteration: int, scene_id: str, object_id: str,
                       anchor=None):
    """Union of the best piece per orientation, or the original.

    For each orientation the largest-area piece whose classifier score
    beats the threshold wins (ties broken by serialization). Scores are
    only computed for pieces actually inspected. The observed placement
    is hard evidence: at its orientation only pieces covering it may
    win, and if none does the whole rewrite is abandoned. When no piece
    qualifies anywhere the original program is returned unchanged.
    """
    by_orientation = {o: [] for o in ORIENTATIONS}
    for piece in pieces:
        by_orientation[piece.orientation].append(piece)

    anchor_cell, anchor_orientation = (None, None) if anchor is None else anchor
    winners = []
    for orientation in ORIENTATIONS:
        group = sorted(by_orientation[orientation],
                       key=lambda p: (-p.area, p.text))
        if orientation == anchor_orientation:
            group = [p for p in group if p.mask.get(anchor_cell, orientation)]
        for piece in group:
            rng_seed = _candidate_seed(seed, iteration, scene_id, object_id, piece.text)
            score = score_mask(model, ctx.scene, ctx.query, piece.mask,
                               m_samples=cfg.m_samples,
                               rng_or_seed=np.random.default_rng(rng_seed))
            if score > cfg.score_threshold:
                winners.append(dataclasses.replace(piece, score=score))
                break
    if not winners:
        return original, False
    if anchor is not None and anchor_orientation not in {w.orientation for w in winners}:
        return original, False
    combined = or_join([w.program for w in winners])
    combined = PlacementProgram(root=combined.root, query=ctx.query)
    return combined, True


def run_iteration(dataset: ProgramDataset, model: LogisticModel,
                  cfg: BootstrapConfig = BootstrapConfig(), seed: int = 0,
                  oracle=None) -> ProgramDataset:
    """One self-training pass over a random subset of entries.

    Returns a new dataset; the input is left untouched. When ``oracle``
    (scene id to ground truths) is given, dataset-level precision and
    recall are appended to the metrics history.
    """
    iteration = dataset.iteration + 1
    keys = sorted(dataset.entries)
    n_selected = int(np.floor(cfg.subset_fraction * len(keys)))
    picker = np.random.default_rng(np.random.SeedSequence([seed, iteration]))
    chosen_idx = picker.choice(len(keys), size=min(n_selected, len(keys)),
                               replace=False)
    chosen = {keys[i] for i in chosen_idx}

    proposer = RetrievalProposer(_dataset_categories(dataset)).fit(dataset)
    prior = PriorSampler().fit(dataset)

    new_entries = dict(dataset.entries)
    n_changed = 0
    for key in keys:
        if key not in chosen:
            continue
        scene_id, object_id = key
        scene = dataset.scenes[scene_id]
        ctx, anchor = completion_context(scene, object_id)
        original = dataset.program_for(scene_id, object_id)
        entry_rng = np.random.default_rng(np.random.SeedSequence([
            seed, iteration,
            zlib.crc32(scene_id.encode()), zlib.crc32(object_id.encode()),
        ]))
        proposals = proposer.propose(ctx.scene, ctx.query, cfg.proposer_k,
                                     exclude=key)
        proposals += prior.propose(ctx.scene, ctx.query, cfg.prior_k, entry_rng)
        candidates = generate_candidates(original, proposals, entry_rng,
                                         n_relax=cfg.n_relax)
        pieces = filter_and_split(candidates, ctx, max_coverage=cfg.max_coverage)
        combined, changed = combine_candidates(
            pieces, original, model, ctx, cfg, seed, iteration, scene_id, object_id,
            anchor=anchor)
        if changed:
            text = serialize_program(combined)
            if text != dataset.entries[key].program_text:
                n_changed += 1
                new_entries[key] = ProgramEntry(
                    scene_id=scene_id,
                    object_id=object_id,
                    program_text=text,
                    provenance=f"combined@{iteration}",
                )

    metrics = None
    staged = dataset.with_entries(new_entries, iteration)
    if oracle is not None:
        metrics = evaluate_dataset_against_oracle(staged, oracle)
        metrics["iteration"] = iteration
        metrics["n_rewritten"] = n_changed
    return dataset.with_entries(new_entries, iteration, metrics)


def bootstrap(dataset: ProgramDataset, model: LogisticModel, iterations: int,
              cfg: BootstrapConfig = BootstrapConfig(), seed: int = 0,
              oracle=None) -> ProgramDataset:
    """Run several self-training iterations and return the final dataset."""
    current = dataset
    for _ in range(iterations):
        current = run_iteration(current, model, cfg=cfg, seed=seed, oracle=oracle)
    return current


def _dataset_categories(dataset: ProgramDataset):
    cats = set()
    for scene in dataset.scenes.values():
        cats.update(o.category for o in scene.furniture)
    return sorted(cats)


def evaluate_dataset_against_oracle(dataset: ProgramDataset, oracle,
                                    dilation_radius: int = 2) -> dict:
    """Mean precision/recall/F1 of entry programs against truth masks.

    Programs execute in their full scene minus the query object; truth
    masks come from the generation-time context. Both sides are
    collapsed over orientations and dilated before comparison.
    """
    rows = []
    for (scene_id, object_id) in sorted(dataset.entries):
        truths = oracle.get(scene_id)
        if truths is None or object_id not in truths:
            continue
        scene = dataset.scenes[scene_id]
        ctx, _ = completion_context(scene, object_id)
        program = dataset.program_for(scene_id, object_id)
        predicted = execute_program(program, ctx)
        metrics = compare_masks(
            collapse_orientations(predicted),
            collapse_orientations(truths[object_id].mask),
            dilation_radius=dilation_radius,
        )
        rows.append({
            "scene_id": scene_id,
            "object_id": object_id,
            "precision": metrics.precision,
            "recall": metrics.recall,
            "f1": metrics.f1,
        })
    if not rows:
        return {"mean_precision": float("nan"), "mean_recall": float("nan"),
                "mean_f1": float("nan"), "n": 0}
    return {
        "mean_precision": float(np.mean([r["precision"] for r in rows])),
        "mean_recall": float(np.mean([r["recall"] for r in rows])),
        "mean_f1": float(np.mean([r["f1"] for r in rows])),
        "n": len(rows),
    }
