"""Independent reference implementations used as test oracles.

Everything here recomputes results through a deliberately different
strategy than the library: scalar per-cell loops instead of vectorized
interval arithmetic, scipy convolutions instead of integral images, set
arithmetic instead of dilated bit twiddling. Slow and obvious on
purpose.
"""

import math

import numpy as np
from scipy.signal import convolve2d

from placekit.dsl import And, Leaf, Or
from placekit.errors import ExecutionError

EPS = 1e-9
ORIENTS = ("N", "E", "S", "W")
_STEPS = {"up": 0, "right": 1, "down": 2, "left": 3}


def half_extents(size, orientation):
    hw, hd = size[0] / 2.0, size[1] / 2.0
    if orientation in ("E", "W"):
        return hd, hw
    return hw, hd


def cell_centers(grid, origin):
    xs = [origin[0] + (i + 0.5) * grid.cell_size for i in range(grid.width)]
    ys = [origin[1] + (i + 0.5) * grid.cell_size for i in range(grid.height)]
    return xs, ys


def point_inside_polygon(x, y, vertices):
    """Scalar even-odd crossing test."""
    inside = False
    n = len(vertices)
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        if (y0 > y) != (y1 > y):
            x_at = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            if x < x_at:
                inside = not inside
    return inside


def interior_cells(scene):
    grid = scene.grid
    xs, ys = cell_centers(grid, scene.grid_origin)
    out = np.zeros((grid.height, grid.width), dtype=bool)
    for iy, cy in enumerate(ys):
        for ix, cx in enumerate(xs):
            out[iy, ix] = point_inside_polygon(cx, cy, scene.room_polygon)
    return out


def rasterize_rect(rect, grid, origin):
    """Cells whose centers fall in the rectangle, clipped to the grid."""
    x0, y0, x1, y1 = rect
    ix0 = math.ceil((x0 - origin[0]) / grid.cell_size - 0.5 - EPS)
    ix1 = math.floor((x1 - origin[0]) / grid.cell_size - 0.5 + EPS)
    iy0 = math.ceil((y0 - origin[1]) / grid.cell_size - 0.5 - EPS)
    iy1 = math.floor((y1 - origin[1]) / grid.cell_size - 0.5 + EPS)
    out = np.zeros((grid.height, grid.width), dtype=bool)
    for iy in range(max(iy0, 0), min(iy1, grid.height - 1) + 1):
        for ix in range(max(ix0, 0), min(ix1, grid.width - 1) + 1):
            out[iy, ix] = True
    return out


def _band_ok(cardinal, lo, hi, q, r):
    qx0, qy0, qx1, qy1 = q
    rx0, ry0, rx1, ry1 = r
    if cardinal == "N":
        gap = qy0 - ry1
        perp = (rx1 > qx0 + EPS) and (rx0 < qx1 - EPS)
    elif cardinal == "S":
        gap = ry0 - qy1
        perp = (rx1 > qx0 + EPS) and (rx0 < qx1 - EPS)
    elif cardinal == "E":
        gap = qx0 - rx1
        perp = (ry1 > qy0 + EPS) and (ry0 < qy1 - EPS)
    else:
        gap = rx0 - qx1
        perp = (ry1 > qy0 + EPS) and (ry0 < qy1 - EPS)
    return (lo - EPS <= gap <= hi + EPS) and perp


def _corridor_ok(orientation, q, r):
    qx0, qy0, qx1, qy1 = q
    rx0, ry0, rx1, ry1 = r
    if orientation == "N":
        return (rx1 > qx0 + EPS) and (rx0 < qx1 - EPS) and (ry1 > qy1 + EPS)
    if orientation == "S":
        return (rx1 > qx0 + EPS) and (rx0 < qx1 - EPS) and (ry0 < qy0 - EPS)
    if orientation == "E":
        return (ry1 > qy0 + EPS) and (ry0 < qy1 - EPS) and (rx1 > qx1 + EPS)
    return (ry1 > qy0 + EPS) and (ry0 < qy1 - EPS) and (rx0 < qx0 - EPS)


def constraint_bits(constraint, ctx):
    """(4, H, W) bool for one constraint leaf, computed cell by cell."""
    scene, query = ctx.scene, ctx.query
    grid = scene.grid
    if not scene.has(constraint.reference):
        raise ExecutionError(f"unresolved reference {constraint.reference!r}")
    ref = scene.find(constraint.reference)
    bits = np.zeros((4, grid.height, grid.width), dtype=bool)
    if constraint.ctype == "align":
        bits[ORIENTS.index(ref.orientation)] = True
        return bits

    if constraint.ctype == "attach":
        lo, hi = -grid.cell_size / 2.0, ctx.attach_band
    elif constraint.ctype == "reachable_by_arm":
        if not ref.holds_humans:
            raise ExecutionError(
                f"reachable_by_arm reference {ref.id!r} does not hold humans")
        lo, hi = ctx.reach_band
    elif constraint.ctype != "face":
        raise ExecutionError(f"unknown constraint type {constraint.ctype!r}")

    if constraint.ctype in ("attach", "reachable_by_arm"):
        base = ORIENTS.index(ref.orientation)
        cardinal = ORIENTS[(base + _STEPS[constraint.direction]) % 4]

    xs, ys = cell_centers(grid, scene.grid_origin)
    rrect = ref.rect
    for o, orientation in enumerate(ORIENTS):
        hx, hy = half_extents(query.size, orientation)
        for iy, cy in enumerate(ys):
            for ix, cx in enumerate(xs):
                qrect = (cx - hx, cy - hy, cx + hx, cy + hy)
                if constraint.ctype == "face":
                    ok = _corridor_ok(orientation, qrect, rrect)
                else:
                    ok = _band_ok(cardinal, lo, hi, qrect, rrect)
                bits[o, iy, ix] = ok
    return bits


def collision_bits(ctx):
    """(4, H, W) bool of collision-valid placements via scipy convolution."""
    scene, query = ctx.scene, ctx.query
    grid = scene.grid
    outside = (~interior_cells(scene)).astype(np.int64)
    occupancies = [
        rasterize_rect(obj.rect, grid, scene.grid_origin).astype(np.int64)
        for obj in scene.furniture
    ]
    valid = np.zeros((4, grid.height, grid.width), dtype=bool)
    for o, orientation in enumerate(ORIENTS):
        hx, hy = half_extents(query.size, orientation)
        rx = math.floor(hx / grid.cell_size + EPS)
        ry = math.floor(hy / grid.cell_size + EPS)
        kernel = np.ones((2 * ry + 1, 2 * rx + 1), dtype=np.int64)
        out_count = convolve2d(outside, kernel, mode="same",
                               boundary="fill", fillvalue=1)
        ok = out_count == 0
        budget = ctx.collision_threshold * ((2 * rx + 1) * (2 * ry + 1))
        for occ in occupancies:
            hits = convolve2d(occ, kernel, mode="same",
                              boundary="fill", fillvalue=0)
            ok &= hits <= budget
        valid[o] = ok
    return valid


def execute_bits(program, ctx):
    """Full per-cell program execution: tree combination, then collisions."""

    def walk(node):
        if isinstance(node, Leaf):
            return constraint_bits(node.constraint, ctx)
        if isinstance(node, And):
            return walk(node.left) & walk(node.right)
        if isinstance(node, Or):
            return walk(node.left) | walk(node.right)
        raise AssertionError(f"unknown node {type(node).__name__}")

    return walk(program.root) & collision_bits(ctx)


def box_sum_loops(values, rx, ry, pad_value=0):
    """Window sums by direct looping, for small arrays only."""
    h, w = values.shape
    out = np.zeros((h, w), dtype=np.int64)
    for iy in range(h):
        for ix in range(w):
            total = 0
            for dy in range(-ry, ry + 1):
                for dx in range(-rx, rx + 1):
                    y, x = iy + dy, ix + dx
                    if 0 <= y < h and 0 <= x < w:
                        total += int(values[y, x])
                    else:
                        total += int(pad_value)
            out[iy, ix] = total
    return out


def dilate_loops(cells, radius):
    """Square-window binary dilation by direct looping."""
    h, w = cells.shape
    out = np.zeros((h, w), dtype=bool)
    for iy in range(h):
        for ix in range(w):
            y0, y1 = max(iy - radius, 0), min(iy + radius, h - 1)
            x0, x1 = max(ix - radius, 0), min(ix + radius, w - 1)
            out[iy, ix] = bool(cells[y0:y1 + 1, x0:x1 + 1].any())
    return out


def prf_from_sets(pred_cells, truth_cells):
    """Precision/recall/F1 from plain sets of (ix, iy) pairs."""
    inter = len(pred_cells & truth_cells)
    precision = inter / len(pred_cells) if pred_cells else 0.0
    recall = inter / len(truth_cells) if truth_cells else 0.0
    if precision + recall == 0.0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)
