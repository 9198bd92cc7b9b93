"""
Growing new rooms object by object
==================================

Synthesis runs the whole stack in a loop: sample what to add next,
predict a placement program for it, execute the program, score the
mask, and place the object. Every step leaves a program behind, so a
finished room comes with its own explanation.
"""

import numpy as np

from placekit.bootstrap import bootstrap, build_program_dataset
from placekit.classifier import train_classifier
from placekit.evaluation import collision_violations
from placekit.procgen import generate_dataset, load_grammar
from placekit.scene import (
    furniture_occupancy,
    object_cells,
    room_interior_mask,
)
from placekit.synthesis import (
    CategorySampler,
    DimensionSampler,
    ProgramPredictor,
    complete,
    synthesize,
)

# Train the stack on a small corpus: extraction seeds the program
# library, two bootstrap iterations widen it, and the classifier
# provides the scoring gate.
grammar = load_grammar()
dataset = generate_dataset(grammar, 40, seed=3)
oracle = {sid: truths for sid, (_, truths) in dataset.items()}
model, _ = train_classifier(dataset, seed=0)
library = bootstrap(build_program_dataset(dataset), model, 2, seed=0,
                    oracle=oracle)
predictor = ProgramPredictor(library, model, seed=11)

# Category and dimension statistics come from the same corpus: how
# many of each category a room holds, and what sizes they come in.
fit_scenes = [library.scenes[sid] for sid in sorted(library.scenes)]
cats = CategorySampler().fit(fit_scenes)
dims = DimensionSampler().fit(fit_scenes)

# Grow a room from nothing. Each step reports the category drawn, the
# program the predictor chose, and the classifier's score for the
# sampled placement.
scene, steps = synthesize(predictor, cats, dims, seed=42,
                          scene_type=fit_scenes[0].scene_type)
w, h = scene.bbox[2] - scene.bbox[0], scene.bbox[3] - scene.bbox[1]
print(f"synthesized a {w:.1f} x {h:.1f} m {scene.scene_type} "
      f"with {len(steps)} objects\n")
for step in steps:
    print(f"  + {step.object_id:<14} score={step.score:.2f}  {step.program_text}")


def render(scene, max_size=56):
    """Coarse ASCII picture; downsamples large grids to fit a terminal."""
    interior = room_interior_mask(scene)
    occupied = furniture_occupancy(scene)
    marks = {}
    for obj in scene.furniture:
        letter = obj.category[0].upper()
        for iy, ix in zip(*np.where(object_cells(obj, scene))):
            marks[(iy, ix)] = letter
    ys, xs = interior.any(axis=1), interior.any(axis=0)
    y0, y1 = ys.argmax(), len(ys) - ys[::-1].argmax()
    x0, x1 = xs.argmax(), len(xs) - xs[::-1].argmax()
    step = max(1, -(-max(y1 - y0, x1 - x0) // max_size))
    rows = []
    for iy in range(y1 - 1, y0 - 1, -step):
        row = ""
        for ix in range(x0, x1, step):
            if (iy, ix) in marks:
                row += marks[(iy, ix)]
            elif occupied[iy, ix]:
                row += "#"
            elif interior[iy, ix]:
                row += "."
            else:
                row += " "
        rows.append(row)
    return "\n".join(rows)


print()
print(render(scene))
legend = ", ".join(f"{obj.category[0].upper()}={obj.category}"
                   for obj in {o.category: o for o in scene.furniture}.values())
print(f"\nlegend: {legend}")
print(f"collision violations: {collision_violations(scene)}")

# The same loop also finishes partly furnished rooms: strip a real
# scene down to its first object and let the predictor add two more.
sid = sorted(dataset)[0]
full_scene = dataset[sid][0]
partial = full_scene
for obj in full_scene.furniture[1:]:
    partial = partial.without_object(obj.id)
grown, added = complete(partial, predictor, cats, dims, seed=9,
                        max_objects=len(partial.furniture) + 2)
print(f"\ncompleted {sid} from {[o.id for o in partial.furniture]}:")
for step in added:
    print(f"  + {step.object_id:<14} {step.program_text}")
