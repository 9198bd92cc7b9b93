"""Shared fixtures and random generators for the test suite."""

import pytest

from placekit.dsl import Constraint, Leaf, PlacementProgram, QuerySpec, and_join, or_join
from placekit.geometry import GridSpec, point_in_polygon
from placekit.procgen import generate_dataset, load_grammar
from placekit.scene import ObjectInstance, make_scene

SMALL_GRID = GridSpec(width=32, height=32, cell_size=0.075)

CATEGORIES = ("bed", "chair", "desk", "stool", "crate")


@pytest.fixture
def small_grid():
    return SMALL_GRID


@pytest.fixture
def square_room(small_grid):
    """Empty 2.4 m square room on the 32x32 grid."""
    return make_scene(
        "testroom",
        [(0.0, 0.0), (2.4, 0.0), (2.4, 2.4), (0.0, 2.4)],
        grid=small_grid,
    )


@pytest.fixture(scope="session")
def gen_dataset():
    """Twelve generated scenes with ground truth, shared where a real
    dataset is needed but its exact content is not under test."""
    return generate_dataset(load_grammar(), n=12, seed=3)


def random_room_polygon(rng):
    """Rectangular or L-shaped rectilinear room fitting in 2.4 m."""
    w = float(rng.uniform(1.7, 2.4))
    h = float(rng.uniform(1.7, 2.4))
    if rng.random() < 0.5:
        return [(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)]
    # Cut a corner rectangle out of the top-right, leaving an L.
    cx = float(rng.uniform(0.6, w - 0.6))
    cy = float(rng.uniform(0.6, h - 0.6))
    return [(0.0, 0.0), (w, 0.0), (w, cy), (cx, cy), (cx, h), (0.0, h)]


def random_scene(rng, grid=SMALL_GRID, n_objects=None):
    """Small random scene; footprints may overlap, that is fine here."""
    polygon = random_room_polygon(rng)
    if n_objects is None:
        n_objects = int(rng.integers(2, 5))
    objects = []
    for i in range(n_objects):
        size = (float(rng.uniform(0.2, 0.8)), float(rng.uniform(0.2, 0.8)))
        for _ in range(50):
            x = float(rng.uniform(0.1, 2.3))
            y = float(rng.uniform(0.1, 2.3))
            if point_in_polygon(x, y, polygon):
                break
        else:
            continue
        objects.append(ObjectInstance(
            id=f"obj_{i}",
            category=str(rng.choice(CATEGORIES)),
            size=size,
            position=(x, y),
            orientation=str(rng.choice(("N", "E", "S", "W"))),
            holds_humans=bool(rng.random() < 0.5),
        ))
    return make_scene("testroom", polygon, objects, grid=grid)


def random_leaf(rng, scene):
    references = [o.id for o in scene.objects]
    ctype = str(rng.choice(("attach", "reachable_by_arm", "align", "face")))
    if ctype == "reachable_by_arm":
        holders = [o.id for o in scene.objects if o.holds_humans]
        if not holders:
            ctype = "attach"
        else:
            references = holders
    reference = str(rng.choice(references))
    direction = None
    if ctype in ("attach", "reachable_by_arm"):
        direction = str(rng.choice(("up", "down", "left", "right")))
    return Leaf(Constraint(ctype=ctype, reference=reference, direction=direction))


def random_program(rng, scene):
    """One to four leaves under a random And/Or shape."""
    n_leaves = int(rng.integers(1, 5))
    programs = [
        PlacementProgram(root=random_leaf(rng, scene)) for _ in range(n_leaves)
    ]
    if n_leaves == 1:
        return programs[0]
    join = and_join if rng.random() < 0.5 else or_join
    if n_leaves >= 3 and rng.random() < 0.5:
        inner = or_join(programs[:2]) if join is and_join else and_join(programs[:2])
        return join([inner] + programs[2:])
    return join(programs)


def random_query(rng):
    return QuerySpec(
        category="query",
        size=(float(rng.uniform(0.2, 0.9)), float(rng.uniform(0.2, 0.9))),
        holds_humans=bool(rng.random() < 0.5),
    )
