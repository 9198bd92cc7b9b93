"""HTTP service over a generated dataset directory.

Serves scenes and annotation cases, executes programs on demand, and
optionally exposes one-step scene completion when a model and program
dataset are configured. Annotations are stored as JSON files under the
data directory; writes are atomic so a crashed request never leaves a
torn file. Domain failures surface as 400s, unknown ids as 404s.
"""

from __future__ import annotations

import json
import os

import numpy as np
from fastapi import FastAPI, HTTPException, Query
from pydantic import BaseModel, Field

from .dsl import QuerySpec, parse_program
from .errors import PlacekitError
from .executor import ExecutionContext, execute_program
from .geometry import cell_index_range
from .mask import PlacementMask, mask_to_json, sample_placements
from .scene import Scene, load_scene, serialize_scene

_CASE_SEP = "__"


class QueryBody(BaseModel):
    category: str
    size: tuple[float, float]
    holds_humans: bool = False

    def to_spec(self) -> QuerySpec:
        return QuerySpec(self.category, (self.size[0], self.size[1]),
                         self.holds_humans)


class ExecuteBody(BaseModel):
    scene_id: str | None = None
    scene: dict | None = None
    query: QueryBody
    program: str


class SampleBody(ExecuteBody):
    k: int = Field(default=1, ge=1, le=1000)
    seed: int = 0


class StepBody(BaseModel):
    scene_id: str | None = None
    scene: dict | None = None
    seed: int = 0


class AnnotationBody(BaseModel):
    case_id: str
    rects: dict[str, list[tuple[float, float, float, float]]]
    annotator: str = "anonymous"


def _scene_payload(scene: Scene) -> dict:
    payload = serialize_scene(scene)
    payload["walls"] = [
        {
            "id": w.id,
            "category": w.category,
            "size": [w.size[0], w.size[1]],
            "position": [w.position[0], w.position[1]],
            "orientation": w.orientation,
        }
        for w in scene.walls
    ]
    origin = scene.grid_origin
    payload["grid"] = {
        "width": scene.grid.width,
        "height": scene.grid.height,
        "cell_size": scene.grid.cell_size,
        "origin": [origin[0], origin[1]],
    }
    return payload


def _mask_payload(mask: PlacementMask) -> dict:
    return {
        "mask": mask_to_json(mask),
        "popcounts": list(mask.slice_popcounts()),
        "total": mask.popcount(),
    }


def create_app(data_dir: str, model_path: str | None = None,
               dataset_dir: str | None = None,
               frontend_dir: str | None = None) -> FastAPI:
    """Build the service over a procgen output directory."""
    from .cli import read_generated
    from .evaluation import build_eval_cases

    generated = read_generated(data_dir)
    cases = build_eval_cases(generated)
    case_index = {
        case.case_id.replace("/", _CASE_SEP): case for case in cases
    }
    annotations_dir = os.path.join(data_dir, "annotations")

    predictor = None
    samplers = None
    if model_path and dataset_dir:
        from .bootstrap import ProgramDataset
        from .classifier import LogisticModel
        from .synthesis import (
            CategorySampler,
            DimensionSampler,
            ProgramPredictor,
        )

        dataset = ProgramDataset.load(dataset_dir)
        model = LogisticModel.load(model_path)
        predictor = ProgramPredictor(dataset, model)
        fit_scenes = [dataset.scenes[sid] for sid in sorted(dataset.scenes)]
        samplers = (
            CategorySampler().fit(fit_scenes),
            DimensionSampler().fit(fit_scenes),
        )

    app = FastAPI(title="placekit service")

    def resolve_scene(scene_id, scene_doc) -> Scene:
        if scene_id is not None:
            if scene_id not in generated:
                raise HTTPException(status_code=404,
                                    detail=f"unknown scene {scene_id!r}")
            return generated[scene_id][0]
        if scene_doc is None:
            raise HTTPException(status_code=400,
                                detail="provide scene_id or an inline scene")
        # Scene payloads served by this app carry derived fields on top
        # of the storable document; accept them back as-is.
        doc = {k: v for k, v in scene_doc.items()
               if k not in ("walls", "grid", "id")}
        try:
            return load_scene(json.dumps(doc))
        except PlacekitError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "scenes": len(generated),
            "cases": len(case_index),
            "step_enabled": predictor is not None,
        }

    @app.get("/scenes")
    def list_scenes():
        return [
            {
                "id": scene_id,
                "scene_type": scene.scene_type,
                "n_objects": len(scene.furniture),
            }
            for scene_id, (scene, _) in sorted(generated.items())
        ]

    @app.get("/scenes/{scene_id}")
    def get_scene(scene_id: str):
        if scene_id not in generated:
            raise HTTPException(status_code=404, detail=f"unknown scene {scene_id!r}")
        payload = _scene_payload(generated[scene_id][0])
        payload["id"] = scene_id
        return payload

    @app.get("/cases")
    def list_cases():
        return [
            {
                "id": public_id,
                "scene_id": case.scene_id,
                "object_id": case.object_id,
                "category": case.query.category,
                "n_context_objects": len(case.scene.furniture),
            }
            for public_id, case in sorted(case_index.items())
        ]

    @app.get("/cases/{case_id}")
    def get_case(case_id: str):
        case = case_index.get(case_id)
        if case is None:
            raise HTTPException(status_code=404, detail=f"unknown case {case_id!r}")
        payload = _scene_payload(case.scene)
        return {
            "id": case_id,
            "scene_id": case.scene_id,
            "object_id": case.object_id,
            "scene": payload,
            "query": {
                "category": case.query.category,
                "size": [case.query.size[0], case.query.size[1]],
                "holds_humans": case.query.holds_humans,
            },
        }

    @app.post("/execute")
    def execute(body: ExecuteBody):
        scene = resolve_scene(body.scene_id, body.scene)
        try:
            program = parse_program(body.program, body.query.to_spec())
            ctx = ExecutionContext(scene=scene, query=body.query.to_spec())
            mask = execute_program(program, ctx)
        except PlacekitError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        payload = _mask_payload(mask)
        payload["grid"] = _scene_payload(scene)["grid"]
        return payload

    @app.post("/sample")
    def sample(body: SampleBody):
        scene = resolve_scene(body.scene_id, body.scene)
        try:
            program = parse_program(body.program, body.query.to_spec())
            ctx = ExecutionContext(scene=scene, query=body.query.to_spec())
            mask = execute_program(program, ctx)
            if mask.is_empty():
                raise HTTPException(status_code=400,
                                    detail="program mask is empty")
            drawn = sample_placements(mask, body.k, body.seed)
        except PlacekitError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        origin = scene.grid_origin
        return {
            "placements": [
                {
                    "cell": [cell[0], cell[1]],
                    "orientation": orientation,
                    "position": list(scene.grid.cell_center(cell, origin)),
                }
                for cell, orientation in drawn
            ]
        }

    @app.post("/step")
    def step(body: StepBody):
        if predictor is None or samplers is None:
            raise HTTPException(
                status_code=400,
                detail="stepping needs the service started with a model and dataset",
            )
        from .synthesis import complete

        scene = resolve_scene(body.scene_id, body.scene)
        category_sampler, dimension_sampler = samplers
        try:
            new_scene, steps = complete(
                scene, predictor, category_sampler, dimension_sampler,
                seed=body.seed, max_objects=len(scene.furniture) + 1)
        except PlacekitError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        if not steps:
            return {"done": True, "scene": _scene_payload(scene)}
        step_info = steps[0]
        return {
            "done": False,
            "object_id": step_info.object_id,
            "category": step_info.category,
            "program": step_info.program_text,
            "score": step_info.score,
            "placement": [[step_info.placement[0][0], step_info.placement[0][1]],
                          step_info.placement[1]],
            "scene": _scene_payload(new_scene),
        }

    def _annotation_path(public_id: str, annotator: str) -> str:
        safe = "".join(c if c.isalnum() or c in "-_" else "_" for c in annotator)
        return os.path.join(annotations_dir, f"{public_id}.{safe}.json")

    @app.get("/annotations")
    def get_annotations(case: str = Query(default=None)):
        if not os.path.isdir(annotations_dir):
            return {"annotations": []}
        out = []
        for name in sorted(os.listdir(annotations_dir)):
            if not name.endswith(".json"):
                continue
            if case is not None and not name.startswith(f"{case}."):
                continue
            with open(os.path.join(annotations_dir, name), encoding="utf-8") as fh:
                out.append(json.load(fh))
        return {"annotations": out}

    @app.post("/annotations")
    def post_annotation(body: AnnotationBody):
        case = case_index.get(body.case_id)
        if case is None:
            raise HTTPException(status_code=404,
                                detail=f"unknown case {body.case_id!r}")
        scene = case.scene
        grid = scene.grid
        origin = scene.grid_origin
        bx0, by0, bx1, by1 = scene.bbox
        tolerance = 1e-6
        bits = np.zeros((4, grid.height, grid.width), dtype=bool)
        from .geometry import ORIENTATIONS

        for orientation, rects in body.rects.items():
            if orientation not in ORIENTATIONS:
                raise HTTPException(status_code=400,
                                    detail=f"bad orientation {orientation!r}")
            plane = ORIENTATIONS.index(orientation)
            for rect in rects:
                x0, y0, x1, y1 = rect
                if x1 <= x0 or y1 <= y0:
                    raise HTTPException(status_code=400,
                                        detail="rectangles need positive area")
                if (x0 < bx0 - tolerance or y0 < by0 - tolerance
                        or x1 > bx1 + tolerance or y1 > by1 + tolerance):
                    raise HTTPException(status_code=400,
                                        detail="rectangle leaves the room bounds")
                ix0, ix1 = cell_index_range(x0, x1, origin[0], grid.cell_size)
                iy0, iy1 = cell_index_range(y0, y1, origin[1], grid.cell_size)
                ix0, ix1 = max(ix0, 0), min(ix1, grid.width - 1)
                iy0, iy1 = max(iy0, 0), min(iy1, grid.height - 1)
                if ix0 <= ix1 and iy0 <= iy1:
                    bits[plane, iy0:iy1 + 1, ix0:ix1 + 1] = True

        mask = PlacementMask(grid=grid, bits=bits)
        stored = {
            "case_id": body.case_id,
            "annotator": body.annotator,
            "rects": {o: [list(r) for r in rects]
                      for o, rects in sorted(body.rects.items())},
            "mask": mask_to_json(mask),
            "popcounts": list(mask.slice_popcounts()),
        }
        os.makedirs(annotations_dir, exist_ok=True)
        path = _annotation_path(body.case_id, body.annotator)
        tmp = f"{path}.tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(stored, fh, sort_keys=True, separators=(",", ":"))
        os.replace(tmp, path)
        return stored

    if frontend_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="ui")

    return app
