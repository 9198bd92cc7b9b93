"""Placement masks and the algebra the executor runs on.

A placement mask answers, for every (cell, orientation) pair of a grid,
whether the query object may be placed there. Masks are immutable: the
backing array is write-protected and all operations return new masks.

Slices follow the cardinal order N, E, S, W. ``bits`` has shape
(4, H, W) and is indexed ``bits[orientation, iy, ix]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import MaskError
from .geometry import ORIENTATIONS, GridSpec

__all__ = [
    "PlacementMask",
    "MaskMetrics",
    "mask_and",
    "mask_or",
    "mask_not",
    "dilate",
    "collapse_orientations",
    "sample_placements",
    "compare_masks",
    "binarize_scalar_mask",
    "mask_to_json",
    "mask_from_json",
    "encode_rle",
    "decode_rle",
]


def _frozen(bits: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(bits, dtype=bool)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class PlacementMask:
    grid: GridSpec
    bits: np.ndarray

    def __post_init__(self):
        expected = (self.grid.n_orientations, self.grid.height, self.grid.width)
        if self.bits.shape != expected:
            raise MaskError(f"mask shape {self.bits.shape} != grid shape {expected}")
        object.__setattr__(self, "bits", _frozen(self.bits))

    @classmethod
    def empty(cls, grid: GridSpec) -> "PlacementMask":
        return cls(grid, np.zeros((grid.n_orientations, grid.height, grid.width), dtype=bool))

    @classmethod
    def full(cls, grid: GridSpec) -> "PlacementMask":
        return cls(grid, np.ones((grid.n_orientations, grid.height, grid.width), dtype=bool))

    @classmethod
    def from_slices(cls, grid: GridSpec, slices) -> "PlacementMask":
        return cls(grid, np.stack([np.asarray(s, dtype=bool) for s in slices]))

    def popcount(self) -> int:
        return int(self.bits.sum())

    def slice_popcounts(self) -> tuple[int, ...]:
        return tuple(int(self.bits[o].sum()) for o in range(4))

    def nonempty_orientations(self) -> tuple[str, ...]:
        return tuple(
            ORIENTATIONS[o] for o in range(4) if self.bits[o].any()
        )

    def is_empty(self) -> bool:
        return not self.bits.any()

    def get(self, cell: tuple[int, int], orientation: str) -> bool:
        ix, iy = cell
        return bool(self.bits[ORIENTATIONS.index(orientation), iy, ix])

    def __eq__(self, other) -> bool:
        if not isinstance(other, PlacementMask):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash((self.grid, self.bits.tobytes()))


@dataclass(frozen=True)
class MaskMetrics:
    precision: float
    recall: float
    f1: float


def _check_same_grid(a: PlacementMask, b: PlacementMask):
    if a.grid != b.grid:
        raise MaskError("masks live on different grids")


def mask_and(a: PlacementMask, b: PlacementMask) -> PlacementMask:
    _check_same_grid(a, b)
    return PlacementMask(a.grid, a.bits & b.bits)


def mask_or(a: PlacementMask, b: PlacementMask) -> PlacementMask:
    _check_same_grid(a, b)
    return PlacementMask(a.grid, a.bits | b.bits)


def mask_not(a: PlacementMask) -> PlacementMask:
    return PlacementMask(a.grid, ~a.bits)


def collapse_orientations(mask: PlacementMask) -> np.ndarray:
    """(H, W) bool union over orientation slices."""
    out = mask.bits.any(axis=0)
    out.flags.writeable = False
    return out


def dilate_2d(cells: np.ndarray, radius: int) -> np.ndarray:
    """Binary dilation with a (2r+1) square structuring element."""
    if radius < 0:
        raise MaskError("dilation radius must be >= 0")
    if radius == 0:
        return cells.astype(bool)
    structure = np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)
    return ndimage.binary_dilation(cells, structure=structure)


def dilate(mask: PlacementMask, radius: int) -> PlacementMask:
    """Per-slice square dilation; orientation slices stay independent."""
    return PlacementMask(
        mask.grid, np.stack([dilate_2d(mask.bits[o], radius) for o in range(4)])
    )


def sample_placements(mask: PlacementMask, k: int, rng) -> list:
    """k placements drawn uniformly (with replacement) over set bits.

    ``rng`` is either a seed int or a numpy Generator. Returns a list of
    ((ix, iy), orientation) tuples. Raises on an empty mask.
    """
    if mask.is_empty():
        raise MaskError("cannot sample from an empty mask")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    coords = np.argwhere(mask.bits)  # rows of (o, iy, ix) in C order
    picks = rng.integers(0, len(coords), size=k)
    out = []
    for idx in picks:
        o, iy, ix = coords[idx]
        out.append(((int(ix), int(iy)), ORIENTATIONS[int(o)]))
    return out


def compare_masks(predicted: np.ndarray, truth: np.ndarray,
                  dilation_radius: int = 2) -> MaskMetrics:
    """Precision, recall, F1 of two collapsed (H, W) masks.

    Both masks are dilated by a square structuring element first so that
    off-by-a-cell boundary effects do not dominate the numbers.
    """
    predicted = np.asarray(predicted, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if predicted.shape != truth.shape:
        raise MaskError("mask shapes differ")
    pred_d = dilate_2d(predicted, dilation_radius)
    truth_d = dilate_2d(truth, dilation_radius)
    inter = int((pred_d & truth_d).sum())
    n_pred = int(pred_d.sum())
    n_truth = int(truth_d.sum())
    precision = inter / n_pred if n_pred else 0.0
    recall = inter / n_truth if n_truth else 0.0
    f1 = (2 * precision * recall / (precision + recall)) if (precision + recall) else 0.0
    return MaskMetrics(precision=precision, recall=recall, f1=f1)


def binarize_scalar_mask(scores: np.ndarray, truth: np.ndarray) -> tuple[np.ndarray, float]:
    """Best >=threshold binarization of a scalar score grid against truth.

    Sweeps the sorted unique score values and returns the binary mask
    and threshold that maximize F1 (no dilation here; comparison
    dilation is the caller's business). Ties keep the lowest threshold.
    """
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(truth, dtype=bool)
    if scores.shape != truth.shape:
        raise MaskError("score and truth shapes differ")
    best = None
    for threshold in np.unique(scores):
        pred = scores >= threshold
        inter = int((pred & truth).sum())
        n_pred, n_truth = int(pred.sum()), int(truth.sum())
        precision = inter / n_pred if n_pred else 0.0
        recall = inter / n_truth if n_truth else 0.0
        f1 = (2 * precision * recall / (precision + recall)) if (precision + recall) else 0.0
        if best is None or f1 > best[0]:
            best = (f1, float(threshold), pred)
    assert best is not None
    return best[2], best[1]


def encode_rle(cells: np.ndarray) -> list:
    """Run lengths of a flattened (H, W) bool slice, row major.

    Runs alternate starting with zeros, so the first entry may be 0 when
    the slice begins with a set cell. The run lengths sum to H * W.
    """
    flat = np.asarray(cells, dtype=bool).ravel()
    if flat.size == 0:
        return []
    changes = np.flatnonzero(np.diff(flat.astype(np.int8)))
    boundaries = np.concatenate(([0], changes + 1, [flat.size]))
    runs = np.diff(boundaries).tolist()
    if flat[0]:
        runs = [0] + runs
    return [int(r) for r in runs]


def decode_rle(runs, width: int, height: int) -> np.ndarray:
    total = width * height
    if sum(runs) != total:
        raise MaskError(f"run lengths sum to {sum(runs)}, expected {total}")
    if any(r < 0 for r in runs):
        raise MaskError("negative run length")
    flat = np.zeros(total, dtype=bool)
    pos = 0
    value = False
    for run in runs:
        if value:
            flat[pos: pos + run] = True
        pos += run
        value = not value
    return flat.reshape(height, width)


def mask_to_json(mask: PlacementMask) -> dict:
    return {
        "grid": {
            "w": mask.grid.width,
            "h": mask.grid.height,
            "cell": mask.grid.cell_size,
        },
        "slices": [encode_rle(mask.bits[o]) for o in range(4)],
    }


def mask_from_json(data) -> PlacementMask:
    if isinstance(data, (str, bytes)):
        data = json.loads(data)
    try:
        grid = GridSpec(
            width=int(data["grid"]["w"]),
            height=int(data["grid"]["h"]),
            cell_size=float(data["grid"]["cell"]),
        )
        slices = data["slices"]
    except (KeyError, TypeError) as exc:
        raise MaskError(f"bad mask document: {exc}") from exc
    if len(slices) != 4:
        raise MaskError("mask document must carry 4 orientation slices")
    return PlacementMask.from_slices(
        grid, [decode_rle(runs, grid.width, grid.height) for runs in slices]
    )
