"""
Scenes, grids, and placement masks
==================================

Builds a small bedroom by hand, shows how the room is discretized
into a cell grid, and walks through the boolean mask algebra that
every later stage is built on.
"""

import numpy as np

from placekit.geometry import GridSpec
from placekit.mask import (
    PlacementMask,
    decode_rle,
    dilate,
    encode_rle,
    mask_and,
    mask_not,
    mask_or,
)
from placekit.scene import (
    ObjectInstance,
    furniture_occupancy,
    make_scene,
    room_interior_mask,
)

# A scene is a room polygon plus a list of objects. Walls are derived
# from the polygon edges automatically; we only list the furniture.
grid = GridSpec(width=40, height=32, cell_size=0.075)
room = [(0.0, 0.0), (3.0, 0.0), (3.0, 2.4), (0.0, 2.4)]
scene = make_scene("bedroom", room, [
    ObjectInstance(id="bed_0", category="bed", size=(1.6, 2.0),
                   position=(1.05, 1.2), orientation="E", holds_humans=True),
    ObjectInstance(id="nightstand_0", category="nightstand", size=(0.4, 0.4),
                   position=(2.35, 2.1), orientation="N"),
    ObjectInstance(id="wardrobe_0", category="wardrobe", size=(1.2, 0.6),
                   position=(2.7, 0.9), orientation="W"),
], grid=grid)

print(f"scene type      : {scene.scene_type}")
print(f"grid            : {grid.width}x{grid.height} cells of {grid.cell_size} m")
print(f"derived walls   : {[w.id for w in scene.walls]}")
print(f"furniture       : {[o.id for o in scene.furniture]}")

# Render the occupancy picture. Each furniture piece rasterizes to the
# grid cells its footprint covers; '#' is furniture, '.' is free floor.


def render(scene):
    interior = room_interior_mask(scene)
    occupied = furniture_occupancy(scene)
    rows = []
    for iy in range(scene.grid.height - 1, -1, -1):
        row = ""
        for ix in range(scene.grid.width):
            if occupied[iy, ix]:
                row += "#"
            elif interior[iy, ix]:
                row += "."
            else:
                row += " "
        rows.append(row)
    return "\n".join(rows)


print()
print(render(scene))

# A placement mask answers "where could a new object go": one boolean
# per (orientation, cell). The four slices are ordered N, E, S, W.
rng = np.random.default_rng(0)
a = PlacementMask(grid, rng.random((4, grid.height, grid.width)) < 0.2)
b = PlacementMask(grid, rng.random((4, grid.height, grid.width)) < 0.2)
print()
print(f"mask a popcounts per orientation: {a.slice_popcounts()}")
print(f"mask b popcounts per orientation: {b.slice_popcounts()}")

# Masks combine like sets. Intersections model "all constraints hold",
# unions model "any alternative holds".
both = mask_and(a, b)
either = mask_or(a, b)
print(f"a AND b popcount : {both.popcount()}")
print(f"a OR  b popcount : {either.popcount()}")
assert both.popcount() <= min(a.popcount(), b.popcount())
assert either.popcount() >= max(a.popcount(), b.popcount())

# De Morgan holds exactly on the bit level.
lhs = mask_not(mask_and(a, b))
rhs = mask_or(mask_not(a), mask_not(b))
print(f"De Morgan check  : {np.array_equal(lhs.bits, rhs.bits)}")

# Dilation grows a mask a few cells in every direction. Metrics use it
# to forgive near-miss predictions at the mask boundary.
point = np.zeros((4, grid.height, grid.width), dtype=bool)
point[0, 20, 20] = True
grown = dilate(PlacementMask(grid, point), radius=2)
print(f"one cell dilated by radius 2 covers {grown.popcount()} cells (5x5 block)")

# Masks serialize as run-length encoded rows, which keeps stored
# datasets and HTTP payloads small.
runs = encode_rle(a.bits[0])
restored = decode_rle(runs, grid.width, grid.height)
print(f"RLE round trip   : {np.array_equal(restored, a.bits[0])} "
      f"({len(runs)} runs for slice N)")
