"""Grid and frame geometry shared by every other module.

Everything here is deliberately small and dependency free: cardinal
orientations, the reference-local direction frame, axis-aligned rectangle
arithmetic, and the cell rasterization rules that the executor, the
collision filter and the procedural generator all have to agree on.

Conventions
-----------
* World coordinates are meters, x to the east, y to the north.
* The four orientations are the cardinals ``N, E, S, W`` in that order;
  an object's orientation is the direction it faces.
* A cell is addressed as ``(ix, iy)`` with ``ix`` along x (width) and
  ``iy`` along y (height). The center of cell ``(ix, iy)`` sits at
  ``origin + ((ix + 0.5) * cell, (iy + 0.5) * cell)``.
* A cell belongs to a box when its center lies inside the box, boundary
  inclusive within ``EPS``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SceneError

ORIENTATIONS = ("N", "E", "S", "W")
DIRECTIONS = ("up", "down", "left", "right")

# Geometric tolerance for boundary-inclusive tests, in meters.
EPS = 1e-9

# Largest permitted cell size in meters. Keeps the attachment band at
# least two cells wide so band constraints cannot vanish under sampling.
MAX_CELL_SIZE = 0.075

_ORIENTATION_VECTORS = {
    "N": (0.0, 1.0),
    "E": (1.0, 0.0),
    "S": (0.0, -1.0),
    "W": (-1.0, 0.0),
}

# Offsets in the clockwise cardinal cycle N -> E -> S -> W. "up" is the
# facing direction of the reference, "right" is one clockwise step from
# it, matching what an observer looking down at the floor plan sees.
_DIRECTION_STEPS = {"up": 0, "right": 1, "down": 2, "left": 3}


def orientation_vector(orientation: str) -> tuple[float, float]:
    """Unit vector an object with this orientation faces along."""
    return _ORIENTATION_VECTORS[orientation]


def orientation_index(orientation: str) -> int:
    return ORIENTATIONS.index(orientation)


def opposite_orientation(orientation: str) -> str:
    return ORIENTATIONS[(orientation_index(orientation) + 2) % 4]


def local_direction(reference_orientation: str, direction: str) -> str:
    """Cardinal that ``direction`` denotes in the reference's own frame.

    "up" is the direction the reference faces, "down" is behind it, and
    "left"/"right" are its left and right when viewed from above facing
    the same way it does.
    """
    base = orientation_index(reference_orientation)
    return ORIENTATIONS[(base + _DIRECTION_STEPS[direction]) % 4]


def oriented_half_extents(size: tuple[float, float], orientation: str) -> tuple[float, float]:
    """Half extents (hx, hy) of a ``size=(width, depth)`` footprint.

    In the canonical frame (facing N) width spans x and depth spans y;
    facing E or W swaps the two.
    """
    half_w, half_d = size[0] / 2.0, size[1] / 2.0
    if orientation in ("E", "W"):
        return half_d, half_w
    return half_w, half_d


@dataclass(frozen=True)
class GridSpec:
    """Discretization of the floor plane.

    The grid covers ``width * cell_size`` by ``height * cell_size``
    meters starting at the scene's room bounding-box corner. Placement
    masks carry one binary slice per orientation.
    """

    width: int
    height: int
    cell_size: float
    n_orientations: int = 4

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise SceneError("grid resolution must be positive")
        if self.cell_size <= 0:
            raise SceneError("cell_size must be positive")
        if self.cell_size > MAX_CELL_SIZE + EPS:
            raise SceneError(
                f"cell_size {self.cell_size} exceeds the {MAX_CELL_SIZE} m limit"
            )
        if self.n_orientations != 4:
            raise SceneError("only the four cardinal orientations are supported")

    @property
    def span(self) -> tuple[float, float]:
        return self.width * self.cell_size, self.height * self.cell_size

    def cell_center(self, cell: tuple[int, int], origin: tuple[float, float]) -> tuple[float, float]:
        ix, iy = cell
        return (
            origin[0] + (ix + 0.5) * self.cell_size,
            origin[1] + (iy + 0.5) * self.cell_size,
        )

    def position_to_cell(self, position: tuple[float, float], origin: tuple[float, float]) -> tuple[int, int]:
        """Cell whose area contains ``position`` (clamped to the grid)."""
        ix = int(np.floor((position[0] - origin[0]) / self.cell_size))
        iy = int(np.floor((position[1] - origin[1]) / self.cell_size))
        ix = min(max(ix, 0), self.width - 1)
        iy = min(max(iy, 0), self.height - 1)
        return ix, iy

    def x_centers(self, origin_x: float) -> np.ndarray:
        return origin_x + (np.arange(self.width) + 0.5) * self.cell_size

    def y_centers(self, origin_y: float) -> np.ndarray:
        return origin_y + (np.arange(self.height) + 0.5) * self.cell_size


DEFAULT_GRID = GridSpec(width=128, height=128, cell_size=6.2 / 128)


def rect_overlap_area(a: tuple[float, float, float, float],
                      b: tuple[float, float, float, float]) -> float:
    """Overlap area of two axis-aligned rectangles (x0, y0, x1, y1)."""
    w = min(a[2], b[2]) - max(a[0], b[0])
    h = min(a[3], b[3]) - max(a[1], b[1])
    if w <= 0.0 or h <= 0.0:
        return 0.0
    return w * h


def rect_from_center(center: tuple[float, float], hx: float, hy: float) -> tuple[float, float, float, float]:
    return (center[0] - hx, center[1] - hy, center[0] + hx, center[1] + hy)


def cell_index_range(lo: float, hi: float, origin: float, cell_size: float) -> tuple[int, int]:
    """Inclusive index range of cells whose centers fall in [lo, hi].

    Returns (i0, i1) with i0 > i1 when the interval covers no center.
    Indices are not clipped to any grid.
    """
    i0 = int(np.ceil((lo - origin) / cell_size - 0.5 - EPS))
    i1 = int(np.floor((hi - origin) / cell_size - 0.5 + EPS))
    return i0, i1


def cells_in_box(rect: tuple[float, float, float, float], grid: GridSpec,
                 origin: tuple[float, float], clip: bool = True) -> set[tuple[int, int]]:
    """Cells whose centers lie inside the rectangle, boundary inclusive."""
    ix0, ix1 = cell_index_range(rect[0], rect[2], origin[0], grid.cell_size)
    iy0, iy1 = cell_index_range(rect[1], rect[3], origin[1], grid.cell_size)
    if clip:
        ix0, ix1 = max(ix0, 0), min(ix1, grid.width - 1)
        iy0, iy1 = max(iy0, 0), min(iy1, grid.height - 1)
    return {(ix, iy) for ix in range(ix0, ix1 + 1) for iy in range(iy0, iy1 + 1)}


def footprint_cell_radius(half_extent: float, cell_size: float) -> int:
    """Half width in whole cells of a footprint window centered on a cell.

    A cell at offset d from the centroid cell is covered when
    ``|d| * cell_size <= half_extent`` (centers compared, boundary
    inclusive), so the window spans ``2 * radius + 1`` cells.
    """
    return int(np.floor(half_extent / cell_size + EPS))


def box_sum(values: np.ndarray, rx: int, ry: int, pad_value: int = 0) -> np.ndarray:
    """Sum of ``values`` over a (2*ry+1) x (2*rx+1) window at every cell.

    ``values`` is indexed [iy, ix]. Cells beyond the array edges
    contribute ``pad_value``. Exact integer arithmetic via an integral
    image, so results are safe to compare with equality.
    """
    arr = values.astype(np.int64, copy=False)
    h, w = arr.shape
    padded = np.full((h + 2 * ry, w + 2 * rx), int(pad_value), dtype=np.int64)
    padded[ry: ry + h, rx: rx + w] = arr
    integral = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1), dtype=np.int64)
    integral[1:, 1:] = padded.cumsum(axis=0).cumsum(axis=1)
    wy, wx = 2 * ry + 1, 2 * rx + 1
    out = (
        integral[wy:, wx:]
        - integral[:-wy, wx:]
        - integral[wy:, :-wx]
        + integral[:-wy, :-wx]
    )
    assert out.shape == (h, w)
    return out


def polygon_signed_area(vertices) -> float:
    area = 0.0
    n = len(vertices)
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        area += x0 * y1 - x1 * y0
    return area / 2.0


def ensure_ccw(vertices):
    """Vertices in counter-clockwise order (reversed if needed)."""
    if polygon_signed_area(vertices) < 0:
        return tuple(reversed(tuple(vertices)))
    return tuple(tuple(v) for v in vertices)


def points_in_polygon(xs: np.ndarray, ys: np.ndarray, vertices) -> np.ndarray:
    """Vectorized even-odd point-in-polygon test.

    ``xs`` and ``ys`` must broadcast against each other; the result has
    the broadcast shape. Points exactly on an edge are classified by the
    crossing rule, which is fine here because callers test cell centers
    that never coincide with wall lines for sane grids.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    inside = np.zeros(np.broadcast(xs, ys).shape, dtype=bool)
    n = len(vertices)
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        crosses = (y0 > ys) != (y1 > ys)
        if not np.any(crosses):
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            x_at = x0 + (ys - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (xs < x_at)
    return inside


def point_in_polygon(x: float, y: float, vertices) -> bool:
    return bool(points_in_polygon(np.array([x]), np.array([y]), vertices)[0])


def polygon_bbox(vertices) -> tuple[float, float, float, float]:
    xs = [v[0] for v in vertices]
    ys = [v[1] for v in vertices]
    return min(xs), min(ys), max(xs), max(ys)
