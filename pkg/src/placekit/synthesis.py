"""Autoregressive scene synthesis from a program dataset.

Scenes are grown one object at a time. A category sampler decides when
to stop and what to add next from empirical scene statistics; a
dimension sampler draws observed sizes; candidate programs come from
the retrieval proposer and prior sampler, are executed in the current
scene, scored by the placement classifier, and the best-scoring
nonempty mask is sampled for the new object's placement. Every
placement therefore went through the executor's collision filter
against the scene built so far.
"""

from __future__ import annotations

import dataclasses
import zlib

import numpy as np

from .bootstrap import PriorSampler, ProgramDataset, RetrievalProposer
from .classifier import LogisticModel, score_mask
from .dsl import QuerySpec, serialize_program
from .errors import ExecutionError, SceneError
from .executor import ExecutionContext, execute_program
from .geometry import DEFAULT_GRID, GridSpec
from .mask import sample_placements
from .scene import ObjectInstance, Scene, make_scene


@dataclasses.dataclass(frozen=True)
class SynthesisConfig:
    proposer_k: int = 4
    prior_k: int = 2
    m_samples: int = 10
    category_retries: int = 5
    max_objects: int = 12


class CategorySampler:
    """What to add next, and when to stop, from empirical counts.

    Stopping uses the discrete hazard of the observed scene sizes:
    given ``t`` objects so far, stop with probability
    ``P(total == t) / P(total >= t)``. Categories are drawn with
    probability proportional to their expected residual demand, the
    mean over fit scenes of ``max(observed_count - current_count, 0)``.
    """

    def __init__(self):
        self._count_vectors = []
        self._totals = []
        self._holds_humans = {}
        self.categories = ()

    def fit(self, scenes) -> "CategorySampler":
        self._count_vectors = []
        self._totals = []
        votes = {}
        cats = set()
        for scene in scenes:
            counts = {}
            for obj in scene.furniture:
                counts[obj.category] = counts.get(obj.category, 0) + 1
                cats.add(obj.category)
                key = obj.category
                yes, total = votes.get(key, (0, 0))
                votes[key] = (yes + (1 if obj.holds_humans else 0), total + 1)
            self._count_vectors.append(counts)
            self._totals.append(sum(counts.values()))
        if not self._count_vectors:
            raise SceneError("category sampler needs at least one scene")
        self.categories = tuple(sorted(cats))
        self._holds_humans = {
            c: (votes[c][0] * 2 > votes[c][1]) for c in self.categories
        }
        return self

    def holds_humans(self, category: str) -> bool:
        return self._holds_humans.get(category, False)

    def stop_probability(self, n_objects: int) -> float:
        at_least = sum(1 for t in self._totals if t >= n_objects)
        if at_least == 0:
            return 1.0
        exactly = sum(1 for t in self._totals if t == n_objects)
        return exactly / at_least

    def residual_demand(self, current_counts: dict) -> dict:
        demand = {}
        for category in self.categories:
            have = current_counts.get(category, 0)
            total = sum(
                max(counts.get(category, 0) - have, 0)
                for counts in self._count_vectors
            )
            demand[category] = total / len(self._count_vectors)
        return demand

    def sample(self, current_counts: dict, rng) -> str | None:
        """Next category, or None to stop."""
        if rng.random() < self.stop_probability(sum(current_counts.values())):
            return None
        demand = self.residual_demand(current_counts)
        total = sum(demand.values())
        if total <= 0.0:
            return None
        cats = list(self.categories)
        probs = [demand[c] / total for c in cats]
        return str(cats[int(rng.choice(len(cats), p=probs))])


class DimensionSampler:
    """Uniform draw over the sizes observed for a category."""

    def __init__(self):
        self._sizes = {}

    def fit(self, scenes) -> "DimensionSampler":
        self._sizes = {}
        for scene in scenes:
            for obj in scene.furniture:
                self._sizes.setdefault(obj.category, []).append(obj.size)
        for category in self._sizes:
            self._sizes[category].sort()
        return self

    def sample(self, category: str, rng) -> tuple[float, float]:
        sizes = self._sizes.get(category)
        if not sizes:
            raise SceneError(f"no observed sizes for category {category!r}")
        return sizes[int(rng.integers(len(sizes)))]


class ProgramPredictor:
    """Best-scoring proposed program for a (scene, query) pair.

    Wraps the retrieval proposer, prior sampler, executor, and
    classifier into one deterministic prediction call.
    """

    def __init__(self, dataset: ProgramDataset, model: LogisticModel,
                 cfg: SynthesisConfig = SynthesisConfig(), seed: int = 0):
        categories = set()
        for scene in dataset.scenes.values():
            categories.update(o.category for o in scene.furniture)
        self.retrieval = RetrievalProposer(sorted(categories)).fit(dataset)
        self.prior = PriorSampler().fit(dataset)
        self.model = model
        self.cfg = cfg
        self.seed = seed

    def predict(self, scene: Scene, query: QuerySpec, salt: int = 0):
        """Returns ``(program, mask, score)`` or None when nothing scores.

        The scene is used as the execution context directly; the query
        object must not already be part of it.
        """
        rng = np.random.default_rng(np.random.SeedSequence(
            [self.seed, salt, zlib.crc32(query.category.encode())]))
        proposals = self.retrieval.propose(scene, query, self.cfg.proposer_k)
        proposals += self.prior.propose(scene, query, self.cfg.prior_k, rng)
        ctx = ExecutionContext(scene=scene, query=query)
        best = None
        for program in proposals:
            try:
                mask = execute_program(program, ctx)
            except ExecutionError:
                continue
            if mask.is_empty():
                continue
            text = serialize_program(program)
            score_rng = np.random.default_rng(np.random.SeedSequence(
                [self.seed, salt, zlib.crc32(text.encode())]))
            score = score_mask(self.model, scene, query, mask,
                               m_samples=self.cfg.m_samples, rng_or_seed=score_rng)
            key = (-score, text)
            if best is None or key < best[0]:
                best = (key, program, mask, score)
        if best is None:
            return None
        return best[1], best[2], best[3]


@dataclasses.dataclass(frozen=True)
class SynthesisStep:
    object_id: str
    category: str
    program_text: str
    score: float
    placement: tuple


def _place(scene: Scene, predictor: ProgramPredictor, category: str,
           size, holds_humans: bool, counts: dict, rng, salt: int):
    query = QuerySpec(category, size, holds_humans)
    result = predictor.predict(scene, query, salt=salt)
    if result is None:
        return None
    program, mask, score = result
    cell, orientation = sample_placements(mask, 1, rng)[0]
    position = scene.grid.cell_center(cell, scene.grid_origin)
    n = counts.get(category, 0)
    obj = ObjectInstance(
        id=f"{category}_{n}",
        category=category,
        size=size,
        position=position,
        orientation=orientation,
        holds_humans=holds_humans,
    )
    step = SynthesisStep(
        object_id=obj.id,
        category=category,
        program_text=serialize_program(program),
        score=score,
        placement=((cell[0], cell[1]), orientation),
    )
    return scene.with_object(obj), step


def complete(scene: Scene, predictor: ProgramPredictor,
             category_sampler: CategorySampler, dimension_sampler: DimensionSampler,
             seed: int = 0, max_objects: int | None = None):
    """Extend a scene object by object until the sampler stops.

    Returns ``(scene, steps)``. Categories that cannot be placed are
    retried a bounded number of times before synthesis gives up.
    """
    cfg = predictor.cfg
    limit = cfg.max_objects if max_objects is None else max_objects
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xADD]))
    counts = {}
    for obj in scene.furniture:
        counts[obj.category] = counts.get(obj.category, 0) + 1
    steps = []
    salt = 0
    while sum(counts.values()) < limit:
        category = category_sampler.sample(counts, rng)
        if category is None:
            break
        placed = None
        attempts = 0
        while placed is None and attempts < cfg.category_retries:
            size = dimension_sampler.sample(category, rng)
            salt += 1
            placed = _place(scene, predictor, category,
                            size, category_sampler.holds_humans(category),
                            counts, rng, salt)
            attempts += 1
            if placed is None and attempts < cfg.category_retries:
                resampled = category_sampler.sample(counts, rng)
                if resampled is None:
                    return scene, steps
                category = resampled
        if placed is None:
            break
        scene, step = placed
        counts[step.category] = counts.get(step.category, 0) + 1
        steps.append(step)
    return scene, steps


def synthesize(predictor: ProgramPredictor, category_sampler: CategorySampler,
               dimension_sampler: DimensionSampler, seed: int = 0,
               scene_type: str = "bedroom",
               room_size: tuple[float, float] | None = None,
               grid: GridSpec = DEFAULT_GRID,
               room_bounds: tuple[float, float] = (3.0, 6.2),
               max_objects: int | None = None):
    """Grow a scene from an empty room. Deterministic in ``seed``."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5C0]))
    if room_size is None:
        lo, hi = room_bounds
        room_size = (float(rng.uniform(lo, hi)), float(rng.uniform(lo, hi)))
    polygon = [(0.0, 0.0), (room_size[0], 0.0),
               (room_size[0], room_size[1]), (0.0, room_size[1])]
    scene = make_scene(scene_type, polygon, grid=grid, max_side=max(grid.span))
    return complete(scene, predictor, category_sampler, dimension_sampler,
                    seed=seed, max_objects=max_objects)
