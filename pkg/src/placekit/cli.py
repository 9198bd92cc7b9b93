"""Command line entry points.

Every command writes deterministic artifacts: canonical JSON, sorted
file order, no timestamps, so a rerun with the same arguments produces
byte-identical output trees. Exit codes: 0 success, 1 runtime failure,
2 bad configuration or usage.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .bootstrap import (
    ProgramDataset,
    build_program_dataset,
    run_iteration,
)
from .classifier import LogisticModel, train_classifier
from .config import RunConfig, config_hash, load_config_file
from .errors import ConfigError, PlacekitError
from .evaluation import (
    build_eval_cases,
    classifier_consistency,
    category_kl,
    collision_violations,
    eval_location_distribution,
    free_floor_system,
    oracle_system,
    predictor_system,
    scene_classifier_accuracy,
    sparsity_rows_to_csv,
    sparsity_sweep,
    uniform_system,
    wall_band_system,
)
from .mask import mask_from_json, mask_to_json
from .procgen import (
    GroundTruth,
    build_classifier_eval_set,
    generate_dataset,
    grammar_to_json,
    load_grammar,
)
from .scene import load_scene, scene_to_json
from .synthesis import (
    CategorySampler,
    DimensionSampler,
    ProgramPredictor,
    complete,
    synthesize,
)

_SYSTEMS = {
    "oracle": lambda args: oracle_system,
    "uniform": lambda args: uniform_system,
    "freefloor": lambda args: free_floor_system,
    "wallband": lambda args: wall_band_system,
}


def _write_text(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_json(path: str, payload) -> None:
    _write_text(path, json.dumps(payload, sort_keys=True, separators=(",", ":")))


def _load_json(path: str):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_generated(directory: str, generated, manifest: dict) -> None:
    """Persist generated scenes plus ground truths under one directory."""
    for scene_id in sorted(generated):
        scene, truths = generated[scene_id]
        _write_text(os.path.join(directory, "scenes", f"{scene_id}.json"),
                    scene_to_json(scene))
        payload = {}
        for object_id in sorted(truths):
            gt = truths[object_id]
            payload[object_id] = {
                "category": gt.category,
                "program": gt.program_text,
                "placement": [[gt.placement[0][0], gt.placement[0][1]],
                              gt.placement[1]],
                "order_index": gt.order_index,
                "mask": mask_to_json(gt.mask),
            }
        _write_json(os.path.join(directory, "truths", f"{scene_id}.json"), payload)
    _write_json(os.path.join(directory, "run.json"), manifest)


def read_generated(directory: str):
    """Load a generated dataset directory back into memory."""
    scenes_dir = os.path.join(directory, "scenes")
    truths_dir = os.path.join(directory, "truths")
    if not os.path.isdir(scenes_dir):
        raise ConfigError(f"{directory} has no scenes/ directory")
    out = {}
    for name in sorted(os.listdir(scenes_dir)):
        if not name.endswith(".json"):
            continue
        scene_id = name[:-5]
        with open(os.path.join(scenes_dir, name), encoding="utf-8") as fh:
            scene = load_scene(fh.read())
        truths = {}
        truth_path = os.path.join(truths_dir, name)
        if os.path.exists(truth_path):
            for object_id, entry in _load_json(truth_path).items():
                truths[object_id] = GroundTruth(
                    object_id=object_id,
                    category=entry["category"],
                    program_text=entry["program"],
                    mask=mask_from_json(json.dumps(entry["mask"])),
                    placement=((entry["placement"][0][0], entry["placement"][0][1]),
                               entry["placement"][1]),
                    order_index=entry["order_index"],
                )
        out[scene_id] = (scene, truths)
    return out


def _run_config(args) -> RunConfig:
    if getattr(args, "config", None):
        return load_config_file(args.config)
    return RunConfig()


def cmd_procgen(args) -> int:
    config = _run_config(args)
    grammar_doc = None
    if args.grammar:
        grammar_doc = _load_json(args.grammar)
    elif config.procgen.grammar:
        grammar_doc = config.procgen.grammar
    grammar = load_grammar(grammar_doc)
    n = args.n if args.n is not None else config.procgen.n_scenes
    seed = args.seed if args.seed is not None else config.seed
    generated = generate_dataset(grammar, n, seed)
    write_generated(args.out, generated, {
        "command": "procgen",
        "n_scenes": n,
        "seed": seed,
        "grammar": grammar_to_json(grammar),
        "config_hash": config_hash(config),
    })
    n_objects = sum(len(truths) for _, truths in generated.values())
    print(f"wrote {len(generated)} scenes ({n_objects} objects) to {args.out}")
    return 0


def cmd_extract(args) -> int:
    generated = read_generated(args.scenes)
    dataset = build_program_dataset(generated)
    dataset.save(args.out)
    print(f"extracted {len(dataset.entries)} programs from "
          f"{len(dataset.scenes)} scenes into {args.out}")
    return 0


def cmd_classifier_train(args) -> int:
    config = _run_config(args)
    seed = args.seed if args.seed is not None else config.seed
    generated = read_generated(args.scenes)
    model, report = train_classifier(
        generated,
        seed=seed,
        pos_samples=config.classifier.pos_samples,
        holdout_fraction=config.classifier.holdout_fraction,
        threshold=config.classifier.threshold,
    )
    model.save(args.out)
    _write_json(f"{args.out}.report.json", report)
    holdout = report["holdout"]
    print(f"model saved to {args.out} "
          f"(holdout acc={holdout['accuracy']:.3f} fp={holdout['fp_rate']:.3f})")
    return 0


def cmd_classifier_eval(args) -> int:
    model = LogisticModel.load(args.model)
    generated = read_generated(args.scenes)
    eval_set = build_classifier_eval_set(generated, seed=args.seed or 0)
    result = classifier_consistency(model, eval_set, repeats=args.repeats,
                                    seed=args.seed or 0)
    text = json.dumps(result, sort_keys=True, separators=(",", ":"))
    if args.out:
        _write_text(args.out, text)
    print(text)
    return 0


def cmd_bootstrap_run(args) -> int:
    config = _run_config(args)
    seed = args.seed if args.seed is not None else config.seed
    dataset = ProgramDataset.load(args.dataset)
    model = LogisticModel.load(args.model)
    oracle = None
    if args.oracle:
        generated = read_generated(args.oracle)
        oracle = {sid: truths for sid, (_, truths) in generated.items()}
    iterations = args.iterations or config.bootstrap_iterations
    for _ in range(iterations):
        dataset = run_iteration(dataset, model, cfg=config.bootstrap,
                                seed=seed, oracle=oracle)
        if dataset.metrics_history:
            m = dataset.metrics_history[-1]
            print(f"iteration {m.get('iteration')}: "
                  f"precision={m.get('mean_precision'):.4f} "
                  f"recall={m.get('mean_recall'):.4f} "
                  f"rewritten={m.get('n_rewritten')}")
    dataset.save(args.out)
    print(f"saved iteration {dataset.iteration} dataset to {args.out}")
    return 0


def _predictor_from_args(args, config: RunConfig) -> ProgramPredictor:
    if not args.dataset or not args.model:
        raise ConfigError("this command needs --dataset and --model")
    dataset = ProgramDataset.load(args.dataset)
    model = LogisticModel.load(args.model)
    return ProgramPredictor(dataset, model, config.synthesis,
                            seed=args.seed if args.seed is not None else config.seed)


def cmd_eval_locdist(args) -> int:
    config = _run_config(args)
    generated = read_generated(args.cases)
    cases = build_eval_cases(generated)
    if args.system == "predictor":
        system = predictor_system(_predictor_from_args(args, config))
    elif args.system in _SYSTEMS:
        system = _SYSTEMS[args.system](args)
    else:
        raise ConfigError(f"unknown system {args.system!r}")
    report = eval_location_distribution(
        system, cases, dilation_radius=config.evaluation.dilation_radius)
    if args.out:
        _write_text(args.out, report.to_json())
    if args.csv:
        _write_text(args.csv, report.to_csv())
    print(f"{args.system}: precision={report.mean_precision:.4f} "
          f"recall={report.mean_recall:.4f} f1={report.mean_f1:.4f} "
          f"cases={report.meta['n_cases']}")
    return 0


def cmd_eval_ckl(args) -> int:
    reference = [s for s, _ in read_generated(args.reference).values()]
    generated = [s for s, _ in read_generated(args.generated).values()]
    value = category_kl(reference, generated)
    violations = sum(collision_violations(s) for s in generated)
    payload = {"category_kl": value, "collision_violations": violations}
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    if args.out:
        _write_text(args.out, text)
    print(text)
    return 0


def cmd_eval_sca(args) -> int:
    reference = [s for s, _ in read_generated(args.reference).values()]
    generated = [s for s, _ in read_generated(args.generated).values()]
    result = scene_classifier_accuracy(reference, generated, seed=args.seed or 0)
    text = json.dumps(result, sort_keys=True, separators=(",", ":"))
    if args.out:
        _write_text(args.out, text)
    print(text)
    return 0


def cmd_eval_sparsity(args) -> int:
    config = _run_config(args)
    generated = read_generated(args.scenes)
    cases = build_eval_cases(read_generated(args.cases))
    rows = sparsity_sweep(
        generated, cases,
        fractions=config.evaluation.sparsity_fractions,
        seeds=config.evaluation.sparsity_seeds,
        predictor_cfg=config.synthesis,
        seed=args.seed if args.seed is not None else config.seed,
    )
    csv_text = sparsity_rows_to_csv(rows)
    if args.out:
        _write_text(args.out, csv_text)
    else:
        print(csv_text, end="")
    return 0


def cmd_synth(args) -> int:
    config = _run_config(args)
    seed = args.seed if args.seed is not None else config.seed
    predictor = _predictor_from_args(args, config)
    dataset = ProgramDataset.load(args.dataset)
    fit_scenes = [dataset.scenes[sid] for sid in sorted(dataset.scenes)]
    cats = CategorySampler().fit(fit_scenes)
    dims = DimensionSampler().fit(fit_scenes)
    total_objects = 0
    for i in range(args.n):
        scene, steps = synthesize(predictor, cats, dims,
                                  seed=seed * 100003 + i,
                                  scene_type=fit_scenes[0].scene_type)
        scene_id = f"synth_{i:04d}"
        _write_text(os.path.join(args.out, "scenes", f"{scene_id}.json"),
                    scene_to_json(scene))
        _write_json(os.path.join(args.out, "steps", f"{scene_id}.json"), [
            {
                "object_id": s.object_id,
                "category": s.category,
                "program": s.program_text,
                "score": s.score,
                "placement": [[s.placement[0][0], s.placement[0][1]], s.placement[1]],
            }
            for s in steps
        ])
        total_objects += len(steps)
    _write_json(os.path.join(args.out, "run.json"), {
        "command": "synth",
        "n_scenes": args.n,
        "seed": seed,
        "config_hash": config_hash(config),
    })
    print(f"synthesized {args.n} scenes ({total_objects} objects) into {args.out}")
    return 0


def cmd_complete(args) -> int:
    config = _run_config(args)
    seed = args.seed if args.seed is not None else config.seed
    predictor = _predictor_from_args(args, config)
    dataset = ProgramDataset.load(args.dataset)
    fit_scenes = [dataset.scenes[sid] for sid in sorted(dataset.scenes)]
    cats = CategorySampler().fit(fit_scenes)
    dims = DimensionSampler().fit(fit_scenes)
    with open(args.scene, encoding="utf-8") as fh:
        scene = load_scene(fh.read())
    scene, steps = complete(scene, predictor, cats, dims, seed=seed,
                            max_objects=args.max_objects)
    _write_text(args.out, scene_to_json(scene))
    print(f"added {len(steps)} objects; scene written to {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(
        data_dir=args.data,
        model_path=args.model,
        dataset_dir=args.dataset,
        frontend_dir=args.frontend,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="placekit",
        description="Constraint-program placement engine for indoor scenes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--config", default=None, help="JSON run config file")

    p = sub.add_parser("procgen", help="generate scenes with ground truth")
    common(p)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--grammar", default=None, help="grammar JSON file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_procgen)

    p = sub.add_parser("extract", help="extract programs from generated scenes")
    common(p)
    p.add_argument("--scenes", required=True, help="procgen output directory")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("classifier", help="placement classifier commands")
    csub = p.add_subparsers(dest="subcommand", required=True)
    pt = csub.add_parser("train")
    common(pt)
    pt.add_argument("--scenes", required=True)
    pt.add_argument("--out", required=True)
    pt.set_defaults(func=cmd_classifier_train)
    pe = csub.add_parser("eval")
    common(pe)
    pe.add_argument("--model", required=True)
    pe.add_argument("--scenes", required=True)
    pe.add_argument("--repeats", type=int, default=5)
    pe.add_argument("--out", default=None)
    pe.set_defaults(func=cmd_classifier_eval)

    p = sub.add_parser("bootstrap", help="self-training over program datasets")
    bsub = p.add_subparsers(dest="subcommand", required=True)
    pb = bsub.add_parser("run")
    common(pb)
    pb.add_argument("--dataset", required=True)
    pb.add_argument("--model", required=True)
    pb.add_argument("--iterations", type=int, default=None)
    pb.add_argument("--oracle", default=None, help="procgen dir with truths")
    pb.add_argument("--out", required=True)
    pb.set_defaults(func=cmd_bootstrap_run)

    p = sub.add_parser("eval", help="evaluation harness")
    esub = p.add_subparsers(dest="subcommand", required=True)
    pl = esub.add_parser("locdist")
    common(pl)
    pl.add_argument("--cases", required=True, help="procgen dir for eval cases")
    pl.add_argument("--system", required=True,
                    choices=sorted(_SYSTEMS) + ["predictor"])
    pl.add_argument("--dataset", default=None)
    pl.add_argument("--model", default=None)
    pl.add_argument("--out", default=None)
    pl.add_argument("--csv", default=None)
    pl.set_defaults(func=cmd_eval_locdist)
    pk = esub.add_parser("ckl")
    common(pk)
    pk.add_argument("--reference", required=True)
    pk.add_argument("--generated", required=True)
    pk.add_argument("--out", default=None)
    pk.set_defaults(func=cmd_eval_ckl)
    ps = esub.add_parser("sca")
    common(ps)
    ps.add_argument("--reference", required=True)
    ps.add_argument("--generated", required=True)
    ps.add_argument("--out", default=None)
    ps.set_defaults(func=cmd_eval_sca)
    pp = esub.add_parser("sparsity")
    common(pp)
    pp.add_argument("--scenes", required=True, help="training procgen dir")
    pp.add_argument("--cases", required=True, help="eval procgen dir")
    pp.add_argument("--out", default=None)
    pp.set_defaults(func=cmd_eval_sparsity)

    p = sub.add_parser("synth", help="synthesize scenes from a dataset")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("complete", help="add objects to an existing scene")
    common(p)
    p.add_argument("--scene", required=True, help="scene JSON file")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--max-objects", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--data", required=True, help="procgen output directory")
    p.add_argument("--model", default=None)
    p.add_argument("--dataset", default=None)
    p.add_argument("--frontend", default=None, help="static frontend directory")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PlacekitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
