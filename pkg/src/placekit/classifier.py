"""Placement plausibility classifier.

A logistic model over hand-built geometric features of a candidate
placement. Training pairs come from generated scenes: the recorded
placement of each object is a positive, and a perturbed copy of it
(translated, reoriented, or both) is the matching negative. The model
scores placement masks by averaging the predicted probability over a
handful of placements sampled from the mask, which is how candidate
programs are ranked during bootstrapping.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import zlib

import numpy as np
from scipy import optimize

from .dsl import QuerySpec
from .errors import ClassifierError
from .executor import (
    DEFAULT_ATTACH_BAND,
    DEFAULT_REACH_BAND,
    ExecutionContext,
    execute_program,
)
from .geometry import (
    ORIENTATIONS,
    cell_index_range,
    local_direction,
    oriented_half_extents,
    orientation_index,
    point_in_polygon,
    rect_from_center,
)
from .mask import PlacementMask, sample_placements
from .scene import (
    ObjectInstance,
    Scene,
    furniture_occupancy,
    objects_face_each_other,
    pairwise_overlap_fraction,
    room_interior_mask,
)

REFERENCE_GROUPS = ("wall", "humans", "same", "other")
_RING_RADII = (0.3, 0.8, 1.5)
_GAP_CLIP = (-0.5, 1.5)
_DEFAULT_THRESHOLD = 0.6

# Relational cues whose importance differs by category (a nightstand
# must align with the bed, a stool must not attach to it), exposed to
# the linear model as per-category interaction columns.
_INTERACTION_BASES = (
    "wall_attach", "wall_aligned", "humans_attach", "humans_reach",
    "humans_beside", "humans_aligned", "other_attach", "other_facing",
)


def feature_names(categories) -> tuple[str, ...]:
    """Stable, ordered names for every feature dimension."""
    names = [f"cat={c}" for c in categories]
    names += ["holds_humans", "pos_nx", "pos_ny", "wall_dist"]
    names += ["outside_frac", "overlap_frac"]
    names += [f"ring_{r:g}" for r in _RING_RADII]
    for group in REFERENCE_GROUPS:
        names += [
            f"{group}_present",
            f"{group}_gap",
            f"{group}_attach",
            f"{group}_reach",
            f"{group}_beside",
            f"{group}_aligned",
            f"{group}_facing",
        ]
        names += [f"{group}_side_{d}" for d in ("up", "right", "down", "left")]
    names += [f"wallgap_{d}" for d in ("up", "right", "down", "left")]
    for c in categories:
        names += [f"{c}*{base}" for base in _INTERACTION_BASES]
    return tuple(names)


def _rect_gap(q, o):
    """Signed separation between two rects and a side-by-side flag.

    Negative means the rects overlap. The flag is set when the rects
    are separated along exactly one axis while their projections on the
    other axis overlap, i.e. one sits beside the other rather than off
    a corner.
    """
    gx = max(o[0] - q[2], q[0] - o[2])
    gy = max(o[1] - q[3], q[1] - o[3])
    if gx > 0.0 and gy > 0.0:
        return math.hypot(gx, gy), False
    if gx <= 0.0 and gy <= 0.0:
        return max(gx, gy), False
    return max(gx, gy), True


def _group_of(obj: ObjectInstance, query: QuerySpec) -> str:
    if obj.is_wall:
        return "wall"
    if obj.category == query.category:
        return "same"
    if obj.holds_humans:
        return "humans"
    return "other"


def _side_of(query_obj: ObjectInstance, target: ObjectInstance) -> str:
    dx = target.position[0] - query_obj.position[0]
    dy = target.position[1] - query_obj.position[1]
    if abs(dx) >= abs(dy):
        cardinal = "E" if dx >= 0 else "W"
    else:
        cardinal = "N" if dy >= 0 else "S"
    for direction in ("up", "right", "down", "left"):
        if local_direction(query_obj.orientation, direction) == cardinal:
            return direction
    raise AssertionError("unreachable")


def placement_features(scene: Scene, query: QuerySpec, cell, orientation: str,
                       categories) -> np.ndarray:
    """Feature vector for placing ``query`` at a cell of ``scene``.

    The scene is the context only; the query object itself must not be
    among its objects.
    """
    grid = scene.grid
    origin = scene.grid_origin
    center = grid.cell_center(cell, origin)
    hx, hy = oriented_half_extents(query.size, orientation)
    qrect = rect_from_center(center, hx, hy)
    query_obj = ObjectInstance(
        id="__query__",
        category=query.category,
        size=query.size,
        position=center,
        orientation=orientation,
        holds_humans=query.holds_humans,
    )

    out = []
    out.extend(1.0 if query.category == c else 0.0 for c in categories)
    out.append(1.0 if query.holds_humans else 0.0)

    bx0, by0, bx1, by1 = scene.bbox
    bw = max(bx1 - bx0, 1e-6)
    bh = max(by1 - by0, 1e-6)
    out.append((center[0] - bx0) / bw)
    out.append((center[1] - by0) / bh)
    edge_dist = min(center[0] - bx0, bx1 - center[0],
                    center[1] - by0, by1 - center[1])
    out.append(np.clip(edge_dist / (0.5 * min(bw, bh)), 0.0, 1.0))

    interior = room_interior_mask(scene)
    ix0, ix1 = cell_index_range(qrect[0], qrect[2], origin[0], grid.cell_size)
    iy0, iy1 = cell_index_range(qrect[1], qrect[3], origin[1], grid.cell_size)
    n_total = max((ix1 - ix0 + 1) * (iy1 - iy0 + 1), 1)
    cx0, cx1 = max(ix0, 0), min(ix1, grid.width - 1)
    cy0, cy1 = max(iy0, 0), min(iy1, grid.height - 1)
    inside = 0
    if cx0 <= cx1 and cy0 <= cy1:
        inside = int(interior[cy0:cy1 + 1, cx0:cx1 + 1].sum())
    out.append((n_total - inside) / n_total)

    overlap = 0.0
    for obj in scene.furniture:
        overlap = max(overlap, pairwise_overlap_fraction(query_obj, obj))
    out.append(overlap)

    occ = furniture_occupancy(scene)
    qx, qy = cell
    for radius in _RING_RADII:
        r = max(int(round(radius / grid.cell_size)), 1)
        x0, x1 = max(qx - r, 0), min(qx + r, grid.width - 1)
        y0, y1 = max(qy - r, 0), min(qy + r, grid.height - 1)
        window = occ[y0:y1 + 1, x0:x1 + 1]
        out.append(float(window.sum()) / max(window.size, 1))

    nearest = {}
    for obj in scene.objects:
        gap, beside = _rect_gap(qrect, obj.rect)
        group = _group_of(obj, query)
        if group not in nearest or gap < nearest[group][0]:
            nearest[group] = (gap, beside, obj)
    for group in REFERENCE_GROUPS:
        if group not in nearest:
            out.extend([0.0, _GAP_CLIP[1], 0.0, 0.0, 0.0, 0.0, 0.0])
            out.extend([0.0] * 4)
            continue
        gap, beside, obj = nearest[group]
        out.append(1.0)
        out.append(float(np.clip(gap, *_GAP_CLIP)))
        out.append(1.0 if gap <= DEFAULT_ATTACH_BAND else 0.0)
        out.append(1.0 if DEFAULT_ATTACH_BAND < gap <= DEFAULT_REACH_BAND[1] else 0.0)
        out.append(1.0 if beside else 0.0)
        out.append(1.0 if obj.orientation == orientation else 0.0)
        facing = (not obj.is_wall) and objects_face_each_other(query_obj, obj)
        out.append(1.0 if facing else 0.0)
        side = _side_of(query_obj, obj)
        out.extend(1.0 if side == d else 0.0 for d in ("up", "right", "down", "left"))

    gaps = {
        "N": by1 - qrect[3],
        "S": qrect[1] - by0,
        "E": bx1 - qrect[2],
        "W": qrect[0] - bx0,
    }
    for direction in ("up", "right", "down", "left"):
        cardinal = local_direction(orientation, direction)
        out.append(float(np.clip(gaps[cardinal], -0.5, 3.0)))

    base = {}
    offset = len(categories) + 9
    for gi, group in enumerate(REFERENCE_GROUPS):
        start = offset + gi * 11
        base[f"{group}_attach"] = out[start + 2]
        base[f"{group}_reach"] = out[start + 3]
        base[f"{group}_beside"] = out[start + 4]
        base[f"{group}_aligned"] = out[start + 5]
        base[f"{group}_facing"] = out[start + 6]
    for c in categories:
        hit = 1.0 if query.category == c else 0.0
        out.extend(hit * base[name] for name in _INTERACTION_BASES)

    return np.asarray(out, dtype=np.float64)


@dataclasses.dataclass(frozen=True)
class LabeledPlacement:
    scene_id: str
    object_id: str
    features: np.ndarray
    label: int
    weight: float


def _cardinal_steps(a: str, b: str) -> int:
    i, j = orientation_index(a), orientation_index(b)
    return min((i - j) % 4, (j - i) % 4)


def perturb_placement(scene: Scene, truth_mask: PlacementMask, cell, orientation: str,
                      rng, min_shift: float = 0.25, max_shift: float = 2.0,
                      max_tries: int = 20):
    """Corrupt a placement into a plausible-looking negative.

    Applies a translation, an orientation change, or both, rejecting
    results whose center leaves the room or that land back inside the
    truth mask. Returns ``(cell, orientation, weight)`` or None when no
    valid corruption was found.
    """
    grid = scene.grid
    origin = scene.grid_origin
    center = grid.cell_center(cell, origin)
    for _ in range(max_tries):
        mode = rng.choice(("translate", "rotate", "both"), p=(0.45, 0.25, 0.3))
        dist = 0.0
        new_center = center
        new_orientation = orientation
        if mode in ("translate", "both"):
            dist = float(rng.uniform(min_shift, max_shift))
            angle = float(rng.uniform(0.0, 2.0 * math.pi))
            new_center = (center[0] + dist * math.cos(angle),
                          center[1] + dist * math.sin(angle))
        if mode in ("rotate", "both"):
            others = [o for o in ORIENTATIONS if o != orientation]
            new_orientation = str(rng.choice(others))
        if not point_in_polygon(new_center[0], new_center[1], scene.room_polygon):
            continue
        new_cell = grid.position_to_cell(new_center, origin)
        if new_cell == cell and new_orientation == orientation:
            continue
        if truth_mask.get(new_cell, new_orientation):
            continue
        steps = _cardinal_steps(orientation, new_orientation)
        weight = float(np.clip(dist + 0.5 * steps, 0.5, 2.0))
        return new_cell, new_orientation, weight
    return None


def build_training_set(dataset, categories, seed: int = 0,
                       pos_samples: int = 3):
    """Paired positive and negative placements from generated scenes.

    ``dataset`` maps scene id to ``(scene, truths)`` as produced by
    scene generation. Each sampled positive gets one perturbed negative
    with the same weight, keeping the classes exactly balanced.
    """
    from .procgen import prefix_scene

    rows = []
    for scene_id in sorted(dataset):
        scene, truths = dataset[scene_id]
        for object_id in sorted(truths, key=lambda k: truths[k].order_index):
            gt = truths[object_id]
            context = prefix_scene(scene, gt.order_index)
            obj = scene.find(object_id)
            query = QuerySpec(obj.category, obj.size, obj.holds_humans)
            entry_seed = np.random.SeedSequence(
                [seed, zlib.crc32(scene_id.encode()), zlib.crc32(object_id.encode())]
            )
            rng = np.random.default_rng(entry_seed)
            placements = [gt.placement]
            if pos_samples > 1:
                placements += sample_placements(gt.mask, pos_samples - 1, rng)
            for pcell, porient in placements:
                corrupted = perturb_placement(context, gt.mask, pcell, porient, rng)
                if corrupted is None:
                    continue
                ncell, norient, weight = corrupted
                pos = placement_features(context, query, pcell, porient, categories)
                neg = placement_features(context, query, ncell, norient, categories)
                rows.append(LabeledPlacement(scene_id, object_id, pos, 1, weight))
                rows.append(LabeledPlacement(scene_id, object_id, neg, 0, weight))
    return rows


@dataclasses.dataclass(frozen=True)
class LogisticModel:
    """Standardized logistic regression with a fixed feature schema."""

    feature_names: tuple
    categories: tuple
    mean: np.ndarray
    std: np.ndarray
    weights: np.ndarray
    bias: float
    threshold: float = _DEFAULT_THRESHOLD

    @property
    def schema(self) -> str:
        return format(zlib.crc32("|".join(self.feature_names).encode()), "08x")

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if x.shape[1] != len(self.feature_names):
            raise ClassifierError(
                f"expected {len(self.feature_names)} features, got {x.shape[1]}"
            )
        z = (x - self.mean) / self.std @ self.weights + self.bias
        return 1.0 / (1.0 + np.exp(-z))

    def predict(self, features: np.ndarray) -> np.ndarray:
        return self.predict_proba(features) > self.threshold

    def to_json(self) -> str:
        payload = {
            "schema": self.schema,
            "feature_names": list(self.feature_names),
            "categories": list(self.categories),
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "threshold": self.threshold,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "LogisticModel":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ClassifierError(f"invalid model JSON: {exc}") from exc
        try:
            model = cls(
                feature_names=tuple(payload["feature_names"]),
                categories=tuple(payload["categories"]),
                mean=np.asarray(payload["mean"], dtype=np.float64),
                std=np.asarray(payload["std"], dtype=np.float64),
                weights=np.asarray(payload["weights"], dtype=np.float64),
                bias=float(payload["bias"]),
                threshold=float(payload["threshold"]),
            )
        except KeyError as exc:
            raise ClassifierError(f"model JSON missing field {exc}") from exc
        if payload.get("schema") != model.schema:
            raise ClassifierError("model schema does not match this feature set")
        return model

    def save(self, path: str) -> None:
        tmp = f"{path}.tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str) -> "LogisticModel":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def _fit_logistic(x: np.ndarray, y: np.ndarray, w: np.ndarray,
                  l2: float = 1e-3) -> tuple[np.ndarray, float]:
    n, d = x.shape

    def objective(theta):
        coef, bias = theta[:d], theta[d]
        z = x @ coef + bias
        # log(1 + exp(z)) - y * z, computed stably
        nll = np.logaddexp(0.0, z) - y * z
        p = 1.0 / (1.0 + np.exp(-z))
        loss = float(np.sum(w * nll)) / n + 0.5 * l2 * float(coef @ coef)
        grad_z = w * (p - y) / n
        grad = np.concatenate([x.T @ grad_z + l2 * coef, [grad_z.sum()]])
        return loss, grad

    theta0 = np.zeros(d + 1)
    result = optimize.minimize(objective, theta0, jac=True, method="L-BFGS-B",
                               options={"maxiter": 500})
    return result.x[:d], float(result.x[d])


def train_classifier(dataset, categories=None, seed: int = 0,
                     pos_samples: int = 3, holdout_fraction: float = 0.2,
                     threshold: float = _DEFAULT_THRESHOLD):
    """Fit the placement classifier on a generated dataset.

    Returns ``(model, report)`` where the report carries holdout
    accuracy and error rates at the model's decision threshold. The
    holdout split is by scene so no room appears on both sides.
    """
    if categories is None:
        cats = set()
        for _, truths in dataset.values():
            cats.update(gt.category for gt in truths.values())
        categories = tuple(sorted(cats))
    else:
        categories = tuple(categories)
    names = feature_names(categories)

    rows = build_training_set(dataset, categories, seed=seed, pos_samples=pos_samples)
    if not rows:
        raise ClassifierError("no training placements could be built")
    labels = {row.label for row in rows}
    if len(labels) < 2:
        raise ClassifierError("training data contains a single class")

    scene_ids = sorted({row.scene_id for row in rows})
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))
    order = rng.permutation(len(scene_ids))
    n_holdout = max(int(round(holdout_fraction * len(scene_ids))), 1) \
        if len(scene_ids) > 1 else 0
    holdout_scenes = {scene_ids[i] for i in order[:n_holdout]}

    train = [r for r in rows if r.scene_id not in holdout_scenes]
    hold = [r for r in rows if r.scene_id in holdout_scenes]
    if not train:
        train, hold = rows, []

    x = np.stack([r.features for r in train])
    y = np.asarray([r.label for r in train], dtype=np.float64)
    w = np.asarray([r.weight for r in train], dtype=np.float64)
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std[std < 1e-9] = 1.0
    coef, bias = _fit_logistic((x - mean) / std, y, w)

    model = LogisticModel(
        feature_names=names,
        categories=categories,
        mean=mean,
        std=std,
        weights=coef,
        bias=bias,
        threshold=threshold,
    )

    def _rates(rows_):
        if not rows_:
            return {"n": 0, "accuracy": float("nan"),
                    "fp_rate": float("nan"), "fn_rate": float("nan")}
        feats = np.stack([r.features for r in rows_])
        truth = np.asarray([r.label for r in rows_], dtype=bool)
        pred = model.predict(feats)
        tp = int(np.sum(pred & truth))
        tn = int(np.sum(~pred & ~truth))
        fp = int(np.sum(pred & ~truth))
        fn = int(np.sum(~pred & truth))
        return {
            "n": len(rows_),
            "accuracy": (tp + tn) / len(rows_),
            "fp_rate": fp / max(fp + tn, 1),
            "fn_rate": fn / max(fn + tp, 1),
        }

    report = {
        "n_scenes": len(scene_ids),
        "n_holdout_scenes": len(holdout_scenes),
        "train": _rates(train),
        "holdout": _rates(hold),
        "threshold": threshold,
    }
    return model, report


def score_mask(model: LogisticModel, scene: Scene, query: QuerySpec,
               mask: PlacementMask, m_samples: int = 10, rng_or_seed=0) -> float:
    """Mean predicted probability over placements sampled from a mask."""
    if mask.is_empty():
        raise ClassifierError("cannot score an empty mask")
    placements = sample_placements(mask, m_samples, rng_or_seed)
    feats = np.stack([
        placement_features(scene, query, cell, orientation, model.categories)
        for cell, orientation in placements
    ])
    return float(model.predict_proba(feats).mean())


def score_program(model: LogisticModel, ctx: ExecutionContext, program,
                  m_samples: int = 10, rng_or_seed=0) -> float:
    """Execute a program and score the resulting mask."""
    mask = execute_program(program, ctx)
    return score_mask(model, ctx.scene, ctx.query, mask,
                      m_samples=m_samples, rng_or_seed=rng_or_seed)
