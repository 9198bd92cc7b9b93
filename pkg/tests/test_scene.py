import json

import numpy as np
import pytest

import oracles
from placekit.errors import SceneError
from placekit.scene import (
    ObjectInstance,
    corridor_hits,
    derive_walls,
    facing_direction_of,
    furniture_occupancy,
    has_major_collisions,
    load_scene,
    make_scene,
    object_cells,
    objects_face_each_other,
    pairwise_overlap_fraction,
    rasterize_footprint,
    room_interior_mask,
    scene_to_json,
    serialize_scene,
)
from conftest import SMALL_GRID, random_scene


def _obj(oid="a", category="crate", size=(0.4, 0.6), position=(1.0, 1.0),
         orientation="N", holds_humans=False):
    return ObjectInstance(id=oid, category=category, size=size,
                          position=position, orientation=orientation,
                          holds_humans=holds_humans)


def test_object_rect_respects_orientation():
    north = _obj(orientation="N")
    east = _obj(orientation="E")
    assert north.rect == (0.8, 0.7, 1.2, 1.3)
    assert east.rect == (0.7, 0.8, 1.3, 1.2)


def test_object_validation():
    with pytest.raises(SceneError):
        _obj(orientation="NE")
    with pytest.raises(SceneError):
        _obj(size=(0.0, 1.0))
    with pytest.raises(SceneError):
        ObjectInstance(id="w", category="wall", size=(1, 0.1), position=(0, 0),
                       orientation="N", holds_humans=True, is_wall=True)


def test_derive_walls_face_inward():
    # CCW square: bottom, right, top, left edges.
    walls = derive_walls([(0, 0), (2, 0), (2, 2), (0, 2)])
    assert [w.orientation for w in walls] == ["N", "W", "S", "E"]
    assert all(w.is_wall for w in walls)
    assert walls[0].position == (1.0, 0.0)
    assert walls[0].size[0] == pytest.approx(2.0)


def test_derive_walls_input_order_does_not_matter():
    ccw = derive_walls([(0, 0), (2, 0), (2, 2), (0, 2)])
    cw = derive_walls([(0, 2), (2, 2), (2, 0), (0, 0)])
    assert {(w.position, w.orientation) for w in ccw} == \
        {(w.position, w.orientation) for w in cw}


def test_derive_walls_rejects_diagonal_edges():
    with pytest.raises(SceneError):
        derive_walls([(0, 0), (2, 1), (2, 2), (0, 2)])


def test_l_shaped_room_wall_count_and_normals():
    polygon = [(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)]
    walls = derive_walls(polygon)
    assert len(walls) == 6
    # Every wall's orientation vector must point into the room: stepping
    # from the wall midpoint along the normal lands inside the polygon.
    from placekit.geometry import orientation_vector, point_in_polygon
    for wall in walls:
        vx, vy = orientation_vector(wall.orientation)
        x = wall.position[0] + 0.2 * vx
        y = wall.position[1] + 0.2 * vy
        assert point_in_polygon(x, y, polygon), wall.id


def test_make_scene_rejects_duplicate_ids(small_grid):
    objs = [_obj("a"), _obj("a")]
    with pytest.raises(SceneError):
        make_scene("t", [(0, 0), (2.4, 0), (2.4, 2.4), (0, 2.4)], objs,
                   grid=small_grid)


def test_make_scene_rejects_object_outside_room(small_grid):
    objs = [_obj("a", position=(5.0, 5.0))]
    with pytest.raises(SceneError):
        make_scene("t", [(0, 0), (2.4, 0), (2.4, 2.4), (0, 2.4)], objs,
                   grid=small_grid)


def test_scene_mutators_return_new_scenes(square_room):
    scene = square_room.with_object(_obj("a"))
    assert scene.has("a") and not square_room.has("a")
    removed = scene.without_object("a")
    assert not removed.has("a")
    with pytest.raises(SceneError):
        scene.without_object("ghost")
    with pytest.raises(SceneError):
        scene.find("ghost")


def test_serialization_round_trip(small_grid):
    rng = np.random.default_rng(7)
    for _ in range(10):
        scene = random_scene(rng)
        loaded = load_scene(scene_to_json(scene), grid=small_grid)
        assert loaded.room_polygon == scene.room_polygon
        assert loaded.furniture == scene.furniture
        # Walls are re-derived, not read back.
        assert loaded.walls == scene.walls


def test_serialize_scene_excludes_walls(square_room):
    doc = serialize_scene(square_room.with_object(_obj("a")))
    assert {o["category"] for o in doc["objects"]} == {"crate"}


def test_load_scene_strictness():
    base = {"scene_type": "t", "room": [[0, 0], [2, 0], [2, 2], [0, 2]],
            "objects": []}
    load_scene(json.dumps(base))
    with pytest.raises(SceneError):
        load_scene(json.dumps({**base, "extra": 1}))
    with pytest.raises(SceneError):
        load_scene(json.dumps({"room": base["room"], "objects": []}))
    with pytest.raises(SceneError):
        load_scene(json.dumps({**base, "objects": [{"id": "a"}]}))
    wall_doc = {**base, "objects": [{
        "id": "w", "category": "wall", "size": [1, 0.1],
        "position": [1, 0], "orientation": "N"}]}
    with pytest.raises(SceneError):
        load_scene(json.dumps(wall_doc))


def test_room_interior_mask_matches_scalar_oracle():
    rng = np.random.default_rng(3)
    for _ in range(5):
        scene = random_scene(rng)
        assert np.array_equal(room_interior_mask(scene),
                              oracles.interior_cells(scene))


def test_object_cells_matches_scalar_oracle():
    rng = np.random.default_rng(4)
    for _ in range(5):
        scene = random_scene(rng)
        for obj in scene.furniture:
            expected = oracles.rasterize_rect(obj.rect, scene.grid,
                                              scene.grid_origin)
            assert np.array_equal(object_cells(obj, scene), expected)


def test_furniture_occupancy_is_union_of_objects():
    rng = np.random.default_rng(5)
    scene = random_scene(rng, n_objects=4)
    union = np.zeros((scene.grid.height, scene.grid.width), dtype=bool)
    for obj in scene.furniture:
        union |= object_cells(obj, scene)
    assert np.array_equal(furniture_occupancy(scene), union)


def test_rasterize_footprint_centers_on_cell():
    obj = _obj(size=(0.3, 0.3))
    cells = rasterize_footprint(obj, (10, 10), "N", SMALL_GRID)
    assert (10, 10) in cells
    # 0.15 half extent over 0.075 cells covers radius-2 neighbors.
    assert (12, 10) in cells and (13, 10) not in cells


def test_pairwise_overlap_fraction():
    a = _obj("a", size=(1.0, 1.0), position=(0.5, 0.5))
    b = _obj("b", size=(1.0, 1.0), position=(1.0, 0.5))
    assert pairwise_overlap_fraction(a, b) == pytest.approx(0.5)
    c = _obj("c", size=(1.0, 1.0), position=(3.0, 3.0))
    assert pairwise_overlap_fraction(a, c) == 0.0


def test_has_major_collisions_threshold():
    a = _obj("a", size=(1.0, 1.0), position=(0.5, 0.5))
    b = _obj("b", size=(1.0, 1.0), position=(1.3, 0.5))  # 20% overlap
    scene = make_scene("t", [(0, 0), (2.4, 0), (2.4, 2.4), (0, 2.4)], [a, b],
                       grid=SMALL_GRID)
    assert not has_major_collisions(scene, threshold=0.21)
    assert has_major_collisions(scene, threshold=0.19)


def test_facing_direction_of_quadrants():
    ref = _obj(position=(1.0, 1.0), orientation="N")
    assert facing_direction_of(ref, (1.0, 2.0)) == "up"
    assert facing_direction_of(ref, (2.0, 1.0)) == "right"
    assert facing_direction_of(ref, (1.0, 0.0)) == "down"
    assert facing_direction_of(ref, (0.0, 1.0)) == "left"
    east = _obj(position=(1.0, 1.0), orientation="E")
    assert facing_direction_of(east, (2.0, 1.0)) == "up"
    assert facing_direction_of(east, (1.0, 2.0)) == "left"


def test_corridor_hits_requires_positive_area_ahead():
    source = (0.0, 0.0, 1.0, 1.0)
    assert corridor_hits(source, "N", (0.2, 1.5, 0.8, 2.0))
    assert not corridor_hits(source, "N", (0.2, -1.0, 0.8, -0.5))  # behind
    assert not corridor_hits(source, "N", (1.0, 1.5, 2.0, 2.0))  # beside
    assert not corridor_hits(source, "N", (0.2, 0.5, 0.8, 0.9))  # inside, not ahead
    assert corridor_hits(source, "E", (1.5, 0.2, 2.0, 0.8))


def test_objects_face_each_other_requires_opposite_orientations():
    a = _obj("a", position=(1.0, 0.5), orientation="N")
    b = _obj("b", position=(1.0, 1.5), orientation="S")
    c = _obj("c", position=(1.0, 1.5), orientation="N")
    assert objects_face_each_other(a, b)
    assert not objects_face_each_other(a, c)
    # Opposite orientations but displaced sideways: corridors miss.
    d = _obj("d", position=(2.0, 1.5), orientation="S")
    assert not objects_face_each_other(a, d)
