"""Command-line interface.

Subcommands map one-to-one onto library operations:

    gen-data      write a synthetic training dataset
    train         train the local per-facet mapping model
    train-global  train the global PCA regression baseline
    reshape       build a body mesh from (partial) measurements
    measure       measure an OBJ body with a spec file
    impute        fill in missing measurements
    evaluate      reconstruction MAE tables (local vs global)
    locality      per-region response to a single-parameter edit
    serve         HTTP service hosting the model and web UI

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import evaluate as ev
from . import impute as imp
from . import measure as ms
from . import mesh as mm
from . import model as mdl
from . import synthesize as syn
from . import synthetic as sd
from . import train as tr
from .schema import PARAMETER_KEYS, ParameterVector, SchemaError, load_parameter_csv


class CliUsageError(Exception):
    pass


def _parse_set_args(pairs: list[str]) -> ParameterVector:
    mapping = {}
    for pair in pairs:
        if "=" not in pair:
            raise CliUsageError(f"--set expects name=value, got {pair!r}")
        name, _, raw = pair.partition("=")
        name = name.strip()
        if name not in PARAMETER_KEYS:
            raise CliUsageError(
                f"unknown parameter {name!r}; valid names: {', '.join(PARAMETER_KEYS)}"
            )
        try:
            mapping[name] = float(raw)
        except ValueError:
            raise CliUsageError(f"non-numeric value for {name!r}: {raw!r}")
    if not mapping:
        raise CliUsageError("provide at least one --set name=value")
    try:
        return ParameterVector.from_dict(mapping)
    except SchemaError as exc:
        raise CliUsageError(str(exc))


def _cmd_gen_data(args) -> int:
    config = sd.GeneratorConfig(
        count=args.n,
        seed=args.seed,
        segments=args.segments,
        rings=args.rings,
        noise_scale=args.noise_scale,
        std_scale=args.std_scale,
    )
    dataset = sd.generate(config)
    sd.write_dataset(dataset, args.out)
    print(f"wrote {config.count} bodies to {args.out} "
          f"({dataset.template.mesh.n_vertices} vertices, {dataset.template.mesh.n_faces} facets)")
    return 0


def _cmd_train(args) -> int:
    meshes, _, specs = sd.load_dataset_dir(args.data)
    options = tr.TrainOptions(seed=args.seed)
    model = tr.train_model(meshes, specs, k=args.k, options=options)
    mdl.save_model(model, args.out)
    masks_per_param = model.masks.sum(axis=0)
    print(f"trained on {len(meshes)} bodies, {model.n_faces} facets, k={model.k}")
    print("facets selecting each parameter:")
    for key, count in zip(PARAMETER_KEYS, masks_per_param):
        print(f"  {key:<30s} {int(count):6d}")
    print(f"model written to {args.out}")
    return 0


def _cmd_train_global(args) -> int:
    meshes, _, specs = sd.load_dataset_dir(args.data)
    model = tr.train_global_baseline(meshes, specs, d=args.d)
    mdl.save_global_model(model, args.out)
    print(f"trained global baseline on {len(meshes)} bodies, d={model.d}; wrote {args.out}")
    return 0


def _cmd_reshape(args) -> int:
    model = mdl.load_model(args.model)
    partial = _parse_set_args(args.set)
    data = load_parameter_csv(args.data) if args.data else None
    config = syn.ReshapeConfig(seed=args.seed, imputer=imp.ImputerConfig(method=args.method))
    result = syn.reshape(model, partial, data=data, config=config)
    mm.save_mesh(result.mesh, args.out)
    summary = {
        "parameters": result.parameters.to_dict(),
        "imputed": {k: bool(result.imputed[i]) for i, k in enumerate(PARAMETER_KEYS)},
    }
    if result.achieved is not None:
        summary["achieved"] = result.achieved.to_dict()
    print(json.dumps(summary, indent=1))
    print(f"mesh written to {args.out}", file=sys.stderr)
    return 0


def _cmd_measure(args) -> int:
    specs = ms.load_specs(args.specs)
    mesh = mm.load_mesh(args.mesh)
    vec = ms.measure(mesh, specs)
    print(json.dumps(vec.to_dict(), indent=1))
    return 0


def _cmd_impute(args) -> int:
    data = load_parameter_csv(args.data)
    partial = _parse_set_args(args.set)
    config = imp.ImputerConfig(method=args.method, seed=args.seed)
    full = imp.impute(partial, data, config)
    out = {
        "parameters": full.to_dict(),
        "imputed": {k: not bool(partial.present[i]) for i, k in enumerate(PARAMETER_KEYS)},
    }
    print(json.dumps(out, indent=1))
    return 0


def _cmd_evaluate(args) -> int:
    meshes, _, specs = sd.load_dataset_dir(args.data)
    model = mdl.load_model(args.model)
    train_idx, test_idx = ev.split_indices(len(meshes), args.test_fraction, args.seed)
    idx = train_idx if args.split == "train" else test_idx
    subset = [meshes[i] for i in idx]
    reports = [
        ev.reconstruction_mae(model, subset, specs, model_id="local", split_id=args.split)
    ]
    if args.global_model:
        gmodel = mdl.load_global_model(args.global_model)
        reports.append(
            ev.reconstruction_mae(gmodel, subset, specs, model_id="global", split_id=args.split)
        )
    table = ev.mae_table_markdown(reports)
    print(table, end="")
    if args.out_csv:
        with open(args.out_csv, "w", encoding="utf-8") as fh:
            fh.write(ev.mae_table_csv(reports))
        print(f"csv written to {args.out_csv}", file=sys.stderr)
    return 0


def _cmd_locality(args) -> int:
    model = mdl.load_model(args.model)
    deps = sd.load_dependencies(args.regions)
    report = ev.locality_report(
        model,
        args.parameter,
        facet_regions=np.asarray(deps["facet_regions"]),
        region_names=deps["region_names"],
        delta=args.delta,
        sigmas=args.sigmas,
    )
    print(json.dumps(report.to_rows(), indent=1))
    return 0


def _cmd_serve(args) -> int:
    import os

    import uvicorn

    from .service import create_app

    model = mdl.load_model(args.model)
    data = load_parameter_csv(args.data) if args.data else None
    app = create_app(model, data=data, static_dir=args.static)
    bind = os.environ.get("BODYRESHAPE_ADDR", f"{args.host}:{args.port}")
    host, _, port = bind.rpartition(":")
    uvicorn.run(app, host=host or args.host, port=int(port))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bodyreshape", description="anthropometric 3D body reshaping toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rings", type=int, default=52)
    p.add_argument("--segments", type=int, default=24)
    p.add_argument("--noise-scale", type=float, default=1.0)
    p.add_argument("--std-scale", type=float, default=1.0)
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="train the local mapping model")
    p.add_argument("--data", required=True, help="dataset directory from gen-data")
    p.add_argument("--k", type=int, default=9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output model file (.mfm)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("train-global", help="train the global PCA baseline")
    p.add_argument("--data", required=True)
    p.add_argument("--d", type=int, default=19)
    p.add_argument("--out", required=True, help="output file (.npz)")
    p.set_defaults(func=_cmd_train_global)

    p = sub.add_parser("reshape", help="build a body mesh from measurements")
    p.add_argument("--model", required=True)
    p.add_argument("--set", action="append", default=[], metavar="NAME=VALUE")
    p.add_argument("--data", help="training CSV for imputation (default: embedded)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", default="mice", choices=["mice", "mean", "knn"])
    p.add_argument("--out", required=True, help="output OBJ path")
    p.set_defaults(func=_cmd_reshape)

    p = sub.add_parser("measure", help="measure an OBJ body")
    p.add_argument("--mesh", required=True)
    p.add_argument("--specs", required=True)
    p.set_defaults(func=_cmd_measure)

    p = sub.add_parser("impute", help="fill in missing measurements")
    p.add_argument("--data", required=True, help="training CSV")
    p.add_argument("--set", action="append", default=[], metavar="NAME=VALUE")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", default="mice", choices=["mice", "mean", "knn"])
    p.set_defaults(func=_cmd_impute)

    p = sub.add_parser("evaluate", help="reconstruction MAE table")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--global-model")
    p.add_argument("--split", default="test", choices=["train", "test"])
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-csv")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("locality", help="per-region response to one edit")
    p.add_argument("--model", required=True)
    p.add_argument("--parameter", required=True)
    p.add_argument("--regions", required=True, help="dependencies.json from gen-data")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--delta", type=float)
    group.add_argument("--sigmas", type=float)
    p.set_defaults(func=_cmd_locality)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--model", required=True)
    p.add_argument("--data", help="training CSV for imputation (default: embedded)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--static", help="directory with the web UI bundle")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CliUsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (
        SchemaError,
        mm.MeshError,
        ms.MeasurementError,
        imp.ImputationError,
        tr.TrainingError,
        syn.SynthesisError,
        sd.GeneratorError,
        mdl.ModelFormatError,
        ev.EvaluationError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
