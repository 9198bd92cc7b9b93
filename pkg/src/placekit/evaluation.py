"""Evaluation harness: location distributions, distribution match, and
classifier consistency.

Location-distribution systems are callables taking an EvalCase and
returning one of three mask forms: a PlacementMask, a boolean (H, W)
array, or a float (H, W) heatmap. Heatmaps are binarized with a single
global threshold fitted on half the cases and evaluated on the other
half, so scalar baselines are compared at their best operating point.
All comparisons dilate both sides before computing precision and
recall, forgiving off-by-one cell disagreements.
"""

from __future__ import annotations

import dataclasses
import io
import json
import csv

import numpy as np

from .classifier import LogisticModel, score_mask, train_classifier
from .dsl import QuerySpec
from .errors import ClassifierError, ValidationError
from .executor import DEFAULT_COLLISION_THRESHOLD
from .geometry import footprint_cell_radius, oriented_half_extents
from .mask import PlacementMask, collapse_orientations, compare_masks
from .scene import (
    Scene,
    furniture_occupancy,
    object_cells,
    room_interior_mask,
)


@dataclasses.dataclass(frozen=True)
class EvalCase:
    """One next-object prediction problem with its reference answer."""

    case_id: str
    scene: Scene
    query: QuerySpec
    truth: np.ndarray
    scene_id: str
    object_id: str


def build_eval_cases(generated) -> list:
    """Cases from generated scenes: partial scene, query, truth mask.

    Each object becomes a case whose context is the scene as it was
    when the object was placed (earlier objects only) and whose truth
    is its recorded mask collapsed over orientations.
    """
    from .procgen import prefix_scene

    cases = []
    for scene_id in sorted(generated):
        scene, truths = generated[scene_id]
        for object_id in sorted(truths, key=lambda k: truths[k].order_index):
            gt = truths[object_id]
            obj = scene.find(object_id)
            cases.append(EvalCase(
                case_id=f"{scene_id}/{object_id}",
                scene=prefix_scene(scene, gt.order_index),
                query=QuerySpec(obj.category, obj.size, obj.holds_humans),
                truth=collapse_orientations(gt.mask),
                scene_id=scene_id,
                object_id=object_id,
            ))
    return cases


@dataclasses.dataclass(frozen=True)
class EvalReport:
    rows: tuple
    mean_precision: float
    mean_recall: float
    mean_f1: float
    meta: dict

    def to_json(self) -> str:
        payload = {
            "mean_precision": self.mean_precision,
            "mean_recall": self.mean_recall,
            "mean_f1": self.mean_f1,
            "meta": self.meta,
            "rows": list(self.rows),
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.DictWriter(
            buffer, fieldnames=["case_id", "precision", "recall", "f1"])
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: row[k] for k in writer.fieldnames})
        return buffer.getvalue()


def _as_binary(output, grid) -> np.ndarray:
    if isinstance(output, PlacementMask):
        return collapse_orientations(output)
    array = np.asarray(output)
    if array.shape != (grid.height, grid.width):
        raise ValidationError(
            f"system output shape {array.shape} does not match the grid")
    if array.dtype == bool:
        return array
    raise ValidationError("scalar outputs must go through threshold fitting")


def _is_scalar_output(output) -> bool:
    return (not isinstance(output, PlacementMask)
            and np.asarray(output).dtype != bool)


def _fit_threshold(outputs, truths, dilation_radius: int):
    pooled = np.concatenate([np.asarray(o).ravel() for o in outputs])
    quantiles = np.unique(np.quantile(pooled, np.linspace(0.05, 0.995, 40)))
    best = None
    for threshold in quantiles:
        scores = [
            compare_masks(np.asarray(o) >= threshold, t,
                          dilation_radius=dilation_radius).f1
            for o, t in zip(outputs, truths)
        ]
        mean_f1 = float(np.mean(scores)) if scores else 0.0
        key = (-mean_f1, threshold)
        if best is None or key < best[0]:
            best = (key, float(threshold))
    return best[1]


def eval_location_distribution(system, cases, dilation_radius: int = 2) -> EvalReport:
    """Precision/recall/F1 of a prediction system over eval cases.

    Binary or mask outputs are scored on every case. Float heatmaps are
    binarized with one global threshold chosen to maximize mean F1 on
    the even-indexed cases; metrics are then reported on the odd half
    only.
    """
    if not cases:
        raise ValidationError("no eval cases given")
    outputs = [system(case) for case in cases]
    scalar = _is_scalar_output(outputs[0])
    meta = {"n_cases": len(cases), "scalar": scalar}

    if scalar:
        fit_idx = range(0, len(cases), 2)
        eval_idx = list(range(1, len(cases), 2)) or [0]
        threshold = _fit_threshold(
            [outputs[i] for i in fit_idx],
            [cases[i].truth for i in fit_idx],
            dilation_radius,
        )
        meta["threshold"] = threshold
        meta["n_fit"] = len(list(fit_idx))
        scored = [(cases[i], np.asarray(outputs[i]) >= threshold) for i in eval_idx]
    else:
        scored = [
            (case, _as_binary(output, case.scene.grid))
            for case, output in zip(cases, outputs)
        ]

    rows = []
    for case, predicted in scored:
        metrics = compare_masks(predicted, case.truth,
                                dilation_radius=dilation_radius)
        rows.append({
            "case_id": case.case_id,
            "precision": metrics.precision,
            "recall": metrics.recall,
            "f1": metrics.f1,
        })
    return EvalReport(
        rows=tuple(rows),
        mean_precision=float(np.mean([r["precision"] for r in rows])),
        mean_recall=float(np.mean([r["recall"] for r in rows])),
        mean_f1=float(np.mean([r["f1"] for r in rows])),
        meta=meta,
    )


def oracle_system(case: EvalCase):
    """Returns the reference mask itself; calibrates the harness at F1 1."""
    return case.truth


def uniform_system(case: EvalCase):
    """Flat heatmap over room-interior cells."""
    return room_interior_mask(case.scene).astype(np.float64)


def free_floor_system(case: EvalCase):
    """Heatmap of unoccupied interior cells."""
    interior = room_interior_mask(case.scene)
    return (interior & ~furniture_occupancy(case.scene)).astype(np.float64)


def wall_band_system(case: EvalCase):
    """Heatmap decaying with distance from the nearest room edge."""
    scene = case.scene
    grid = scene.grid
    bx0, by0, bx1, by1 = scene.bbox
    xs = grid.x_centers(scene.grid_origin[0])[np.newaxis, :]
    ys = grid.y_centers(scene.grid_origin[1])[:, np.newaxis]
    dist = np.minimum(np.minimum(xs - bx0, bx1 - xs),
                      np.minimum(ys - by0, by1 - ys))
    heat = np.exp(-np.maximum(dist, 0.0) / 0.3)
    return np.where(room_interior_mask(scene), heat, 0.0)


def predictor_system(predictor):
    """Wrap a ProgramPredictor as an eval system returning binary masks."""

    def system(case: EvalCase):
        result = predictor.predict(case.scene, case.query)
        if result is None:
            grid = case.scene.grid
            return np.zeros((grid.height, grid.width), dtype=bool)
        return result[1]

    return system


def category_kl(reference_scenes, generated_scenes, epsilon: float = 1e-6) -> float:
    """KL divergence of category frequencies, reference against generated.

    Counts are over object instances; both distributions are smoothed
    with ``epsilon`` over the union of categories. Natural log.
    """
    def counts(scenes):
        out = {}
        for scene in scenes:
            for obj in scene.furniture:
                out[obj.category] = out.get(obj.category, 0) + 1
        return out

    ref = counts(reference_scenes)
    gen = counts(generated_scenes)
    union = sorted(set(ref) | set(gen))
    if not union:
        raise ValidationError("no categories to compare")
    p = np.array([ref.get(c, 0) for c in union], dtype=np.float64)
    q = np.array([gen.get(c, 0) for c in union], dtype=np.float64)
    p = (p + epsilon) / (p.sum() + epsilon * len(union))
    q = (q + epsilon) / (q.sum() + epsilon * len(union))
    return float(np.sum(p * np.log(p / q)))


def collision_violations(scene: Scene,
                         threshold: float = DEFAULT_COLLISION_THRESHOLD) -> int:
    """Placement-order collision violations in a scene.

    A later-placed object may overlap an earlier one by at most
    ``threshold`` of its own footprint window, measured on rasterized
    cells, and every footprint cell must lie inside the room. This is
    the same contract the executor's collision filter enforces.
    """
    grid = scene.grid
    interior = room_interior_mask(scene)
    violations = 0
    rasters = [object_cells(obj, scene) for obj in scene.furniture]
    for j, obj in enumerate(scene.furniture):
        hx, hy = oriented_half_extents(obj.size, obj.orientation)
        rx = footprint_cell_radius(hx, grid.cell_size)
        ry = footprint_cell_radius(hy, grid.cell_size)
        window = (2 * rx + 1) * (2 * ry + 1)
        if bool((rasters[j] & ~interior).any()):
            violations += 1
            continue
        for i in range(j):
            overlap = int((rasters[i] & rasters[j]).sum())
            if overlap > threshold * window:
                violations += 1
                break
    return violations


def _scene_features(scene: Scene, categories) -> np.ndarray:
    bx0, by0, bx1, by1 = scene.bbox
    width, height = bx1 - bx0, by1 - by0
    interior = room_interior_mask(scene)
    occupancy = furniture_occupancy(scene)
    interior_cells = max(int(interior.sum()), 1)
    counts = {c: 0 for c in categories}
    wall_adjacent = 0
    for obj in scene.furniture:
        if obj.category in counts:
            counts[obj.category] += 1
        x0, y0, x1, y1 = obj.rect
        edge_gap = min(x0 - bx0, bx0 + width - x1, y0 - by0, by0 + height - y1)
        if edge_gap <= 0.2:
            wall_adjacent += 1
    n = max(len(scene.furniture), 1)
    vec = [width, height, width * height, len(scene.furniture),
           float((occupancy & interior).sum()) / interior_cells,
           wall_adjacent / n]
    vec.extend(counts[c] for c in categories)
    return np.asarray(vec, dtype=np.float64)


def scene_classifier_accuracy(reference_scenes, generated_scenes,
                              n_splits: int = 5, seed: int = 0) -> dict:
    """How well a held-out classifier tells generated scenes from real.

    Returns accuracies in percent, averaged over seeded 50/50 splits.
    Near 50 the two sets are indistinguishable; near 100 the generator
    has an obvious tell.
    """
    from .classifier import _fit_logistic

    n_ref, n_gen = len(reference_scenes), len(generated_scenes)
    if n_ref == 0 or n_gen == 0:
        raise ClassifierError("both scene sets must be non-empty")
    if max(n_ref, n_gen) > 10 * min(n_ref, n_gen):
        raise ClassifierError("scene sets are too imbalanced to compare")

    categories = sorted({
        o.category
        for scene in list(reference_scenes) + list(generated_scenes)
        for o in scene.furniture
    })
    x = np.stack([_scene_features(s, categories)
                  for s in list(reference_scenes) + list(generated_scenes)])
    y = np.concatenate([np.ones(n_ref), np.zeros(n_gen)])

    accuracies = []
    for split in range(n_splits):
        rng = np.random.default_rng(np.random.SeedSequence([seed, split]))
        order = rng.permutation(len(y))
        half = len(y) // 2
        train_idx, test_idx = order[:half], order[half:]
        if len({int(v) for v in y[train_idx]}) < 2:
            continue
        mean = x[train_idx].mean(axis=0)
        std = x[train_idx].std(axis=0)
        std[std < 1e-9] = 1.0
        coef, bias = _fit_logistic(
            (x[train_idx] - mean) / std, y[train_idx],
            np.ones(len(train_idx)))
        probs = 1.0 / (1.0 + np.exp(-(((x[test_idx] - mean) / std) @ coef + bias)))
        predictions = probs > 0.5
        accuracies.append(float(np.mean(predictions == (y[test_idx] > 0.5))) * 100.0)
    if not accuracies:
        raise ClassifierError("no usable train/test split")
    return {
        "mean_accuracy": float(np.mean(accuracies)),
        "accuracies": accuracies,
        "n_reference": n_ref,
        "n_generated": n_gen,
    }


def classifier_consistency(model: LogisticModel, eval_set, repeats: int = 5,
                           threshold: float | None = None, seed: int = 0,
                           m_samples: int = 10) -> dict:
    """Stability of mask-level decisions under resampled placements.

    Each labeled mask is scored ``repeats`` times with different
    placement draws; the majority decision is compared to the label.
    Consistency is reported per class along with the confusion table
    (as fractions of all cases) and the false-positive rate among
    negatives.
    """
    if threshold is None:
        threshold = model.threshold
    if not eval_set:
        raise ClassifierError("empty evaluation set")

    tp = tn = fp = fn = 0
    for index, case in enumerate(eval_set):
        votes = 0
        for rep in range(repeats):
            rng = np.random.default_rng(np.random.SeedSequence([seed, index, rep]))
            score = score_mask(model, case.scene, case.query, case.mask,
                               m_samples=m_samples, rng_or_seed=rng)
            votes += 1 if score > threshold else 0
        decided_positive = votes * 2 > repeats
        if case.label == 1 and decided_positive:
            tp += 1
        elif case.label == 1:
            fn += 1
        elif decided_positive:
            fp += 1
        else:
            tn += 1

    n = len(eval_set)
    n_pos = tp + fn
    n_neg = fp + tn
    return {
        "n_cases": n,
        "n_positive": n_pos,
        "n_negative": n_neg,
        "positive_consistency": tp / n_pos if n_pos else float("nan"),
        "negative_consistency": tn / n_neg if n_neg else float("nan"),
        "accuracy": (tp + tn) / n,
        "tp": tp / n, "tn": tn / n, "fp": fp / n, "fn": fn / n,
        "fp_rate": fp / n_neg if n_neg else float("nan"),
        "fn_rate": fn / n_pos if n_pos else float("nan"),
        "threshold": threshold,
        "repeats": repeats,
    }


def sparsity_sweep(generated, eval_cases,
                   fractions=(1.0, 0.5, 0.25, 0.1, 0.05),
                   seeds=(0, 1, 2), predictor_cfg=None, seed: int = 0) -> list:
    """Prediction quality as the training scene budget shrinks.

    For each fraction and seed a fresh pipeline (extraction, placement
    classifier, retrieval predictor) is built from a random subset of
    the generated scenes and evaluated on the fixed cases. Returns one
    row per run.
    """
    from .bootstrap import build_program_dataset
    from .synthesis import ProgramPredictor, SynthesisConfig

    cfg = predictor_cfg or SynthesisConfig()
    scene_ids = sorted(generated)
    rows = []
    for fraction in fractions:
        n_scenes = max(int(np.floor(fraction * len(scene_ids))), 1)
        for run_seed in seeds:
            rng = np.random.default_rng(np.random.SeedSequence(
                [seed, run_seed, int(round(fraction * 1000))]))
            chosen = sorted(
                scene_ids[i]
                for i in rng.choice(len(scene_ids), size=n_scenes, replace=False)
            )
            subset = {sid: generated[sid] for sid in chosen}
            model, _ = train_classifier(subset, seed=run_seed)
            dataset = build_program_dataset(subset)
            predictor = ProgramPredictor(dataset, model, cfg, seed=run_seed)
            report = eval_location_distribution(predictor_system(predictor), eval_cases)
            rows.append({
                "fraction": fraction,
                "seed": run_seed,
                "n_scenes": n_scenes,
                "mean_precision": report.mean_precision,
                "mean_recall": report.mean_recall,
                "mean_f1": report.mean_f1,
            })
    return rows


def sparsity_rows_to_csv(rows) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=[
        "fraction", "seed", "n_scenes", "mean_precision", "mean_recall", "mean_f1"])
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buffer.getvalue()
