"""
Measuring placement and scene quality
=====================================

Two families of metrics. Location metrics score a system's predicted
placement mask against the generator's mask, case by case. Scene
metrics compare whole sets of rooms: category mix, collision
discipline, and whether a fresh classifier can tell generated rooms
from reference ones.
"""

from placekit.evaluation import (
    build_eval_cases,
    category_kl,
    classifier_consistency,
    collision_violations,
    eval_location_distribution,
    free_floor_system,
    oracle_system,
    scene_classifier_accuracy,
    uniform_system,
    wall_band_system,
)
from placekit.classifier import train_classifier
from placekit.procgen import build_classifier_eval_set, generate_dataset, load_grammar

grammar = load_grammar()
dataset = generate_dataset(grammar, 25, seed=5)
scenes = [dataset[sid][0] for sid in sorted(dataset)]

# Every recorded placement becomes one evaluation case: the scene as
# it looked before the object arrived, the object's size and category,
# and the generator's own placement mask as truth.
cases = build_eval_cases(dataset)
print(f"{len(cases)} evaluation cases from {len(dataset)} scenes")

# Location-distribution scoring. The oracle system replays the truth
# masks and calibrates the harness at F1 = 1; the dumb baselines
# bracket it from below.
systems = [
    ("oracle", oracle_system),
    ("free floor", free_floor_system),
    ("wall band", wall_band_system),
    ("uniform", uniform_system),
]
print()
print(f"{'system':>12}  {'precision':>9}  {'recall':>6}  {'f1':>6}")
for name, system in systems:
    report = eval_location_distribution(system, cases)
    print(f"{name:>12}  {report.mean_precision:9.3f}  "
          f"{report.mean_recall:6.3f}  {report.mean_f1:6.3f}")

# Scene-set statistics. Comparing the set to itself gives KL 0 and, by
# construction of the generator, zero collision violations.
print()
print(f"category KL (self)     : {category_kl(scenes, scenes):.6f}")
print(f"collision violations   : {sum(collision_violations(s) for s in scenes)}")

# A second generated set with a different seed draws from the same
# grammar, so its category mix sits close to the reference.
other = generate_dataset(grammar, 25, seed=6)
other_scenes = [other[sid][0] for sid in sorted(other)]
print(f"category KL (seed 6)   : {category_kl(scenes, other_scenes):.6f}")

# Scene-classifier accuracy near 50 means the two sets are hard to
# tell apart; same-grammar sets should sit well under the 75 mark.
sca = scene_classifier_accuracy(scenes, other_scenes, seed=0)
print(f"scene classifier acc   : {sca['mean_accuracy']:.1f} "
      f"(splits: {[round(a, 1) for a in sca['accuracies']]})")

# Classifier consistency stresses the placement classifier against
# labeled masks: recorded placements must score as valid, strict
# supersets of the truth mask must not.
model, _ = train_classifier(dataset, seed=0)
eval_set = build_classifier_eval_set(dataset, seed=0)
report = classifier_consistency(model, eval_set, repeats=3, seed=0)
print()
print(f"labeled mask cases     : {report['n_cases']} "
      f"({report['n_positive']} positive / {report['n_negative']} negative)")
print(f"positive consistency   : {report['positive_consistency']:.3f}")
print(f"false positive rate    : {report['fp_rate']:.3f}")
