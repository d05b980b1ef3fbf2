"""Command-line entry points.

    xrayscreen ingest --manifest corpus.csv --out store/
    xrayscreen extract --store store/ --out features.csv --cell 16
    xrayscreen experiment cellsize --spec run.json --seed 7 --out runs/sweep
    xrayscreen export-components --model dcv.json --train features.csv --out cloud.csv

Option precedence everywhere: command-line flags override the --config (or
--spec) file, which overrides built-in defaults. Each run persists its fully
resolved configuration next to its outputs, and nothing is written outside
the requested output location.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .dataset import DatasetError, load_manifest, write_normalized_store
from .descriptor import (ConfigurationError, HogConfig, extract_features,
                         load_feature_matrix, save_feature_matrix)
from .experiments import (EXPERIMENT_NAMES, ExperimentSpec, SpecValidationError,
                          run_experiment)
from .reduce import LabeledMatrix, ReduceError, load_model, project, top_components


def _fail(message: str, code: int = 1) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    return doc


def _merge(defaults: dict, config: dict, flags: dict) -> dict:
    merged = dict(defaults)
    merged.update(config)
    merged.update({k: v for k, v in flags.items() if v is not None})
    return merged


def _write_json(path: Path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def cmd_ingest(args) -> int:
    try:
        cfg = _merge({"size": 400, "jobs": 1, "seed": None},
                     _load_config_file(args.config),
                     {"size": args.size, "jobs": args.jobs, "seed": args.seed})
        manifest = load_manifest(args.manifest)
    except (DatasetError, OSError, ValueError) as exc:
        return _fail(str(exc), 2)
    out = Path(args.out)
    store, failures = write_normalized_store(manifest, out, int(cfg["size"]),
                                             int(cfg["jobs"]))
    _write_json(out / "ingest_log.json", {
        "n_requested": len(manifest),
        "n_ingested": len(store),
        "failures": failures,
    })
    _write_json(out / "spec.json", {
        "command": "ingest",
        "manifest": str(args.manifest),
        "out": str(out),
        "size": int(cfg["size"]),
        "jobs": int(cfg["jobs"]),
        "seed": cfg["seed"],
    })
    for f in failures:
        print(f"warning: skipped {f['sample_id']}: {f['error']}", file=sys.stderr)
    if len(manifest) and not len(store):
        return _fail("all manifest entries failed to ingest")
    print(f"ingested {len(store)}/{len(manifest)} images into {out}")
    return 0


def cmd_extract(args) -> int:
    try:
        cfg = _merge({"cell": 16, "bins": 9, "size": 400, "jobs": 1},
                     _load_config_file(args.config),
                     {"cell": args.cell, "bins": args.bins, "size": args.size,
                      "jobs": args.jobs})
        manifest = load_manifest(Path(args.store) / "manifest.csv")
        hog = HogConfig(cell_size=int(cfg["cell"]), n_bins=int(cfg["bins"]))
        fm = extract_features(manifest, hog, int(cfg["size"]), int(cfg["jobs"]))
    except (DatasetError, ConfigurationError, OSError, ValueError) as exc:
        return _fail(str(exc), 2)
    out = Path(args.out)
    save_feature_matrix(fm, out)
    _write_json(out.with_name(out.stem + ".spec.json"), {
        "command": "extract",
        "store": str(args.store),
        "out": str(out),
        "cell": int(cfg["cell"]),
        "bins": int(cfg["bins"]),
        "size": int(cfg["size"]),
        "jobs": int(cfg["jobs"]),
    })
    if not len(fm):
        print("warning: store holds no images, wrote header-only matrix",
              file=sys.stderr)
    print(f"extracted {len(fm)} descriptors ({fm.values.shape[1] if len(fm) else 0} "
          f"dims) into {out}")
    return 0


def cmd_experiment(args) -> int:
    try:
        doc = _load_config_file(args.spec)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        return _fail(str(exc), 2)
    doc["experiment"] = args.name
    flags = {"manifest": args.manifest, "out": args.out, "seed": args.seed,
             "jobs": args.jobs, "cell_size": args.cell_size, "k": args.k,
             "image_size": args.image_size, "per_class": args.per_class}
    doc = _merge({}, doc, flags)
    try:
        spec = ExperimentSpec.from_dict(doc)
        spec.validate()
        run_experiment(spec)
    except SpecValidationError as exc:
        for issue in exc.issues:
            print(f"spec error: {issue}", file=sys.stderr)
        return 2
    except (DatasetError, ConfigurationError, ReduceError, OSError) as exc:
        return _fail(str(exc))
    summary = Path(spec.out_dir) / "report.txt"
    if summary.is_file():
        print(summary.read_text().rstrip())
    print(f"experiment {args.name} complete, outputs in {spec.out_dir}")
    return 0


def cmd_export_components(args) -> int:
    try:
        model = load_model(args.model)
        train_fm = load_feature_matrix(args.train)
        emb_train = LabeledMatrix(rows=project(model, train_fm.values),
                                  labels=list(train_fm.labels),
                                  sample_ids=list(train_fm.sample_ids))
        emb_test = None
        if args.test is not None:
            test_fm = load_feature_matrix(args.test)
            emb_test = LabeledMatrix(rows=project(model, test_fm.values),
                                     labels=list(test_fm.labels),
                                     sample_ids=list(test_fm.sample_ids))
        cloud = top_components(model, emb_train, emb_test, n=args.n)
    except (ReduceError, ConfigurationError, OSError, ValueError, KeyError) as exc:
        return _fail(str(exc), 2)
    out = Path(args.out)
    cloud.save_csv(out)
    _write_json(out.with_name(out.stem + ".spec.json"), {
        "command": "export-components",
        "model": str(args.model),
        "train": str(args.train),
        "test": None if args.test is None else str(args.test),
        "n": args.n,
        "out": str(out),
    })
    for note in cloud.warnings:
        print(f"warning: {note}", file=sys.stderr)
    print(f"wrote {len(cloud.rows)} point-cloud rows ({cloud.n_components} "
          f"components) to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xrayscreen",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="normalize a corpus into an image store")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("extract", help="compute descriptor rows for a store")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cell", type=int, default=None)
    p.add_argument("--bins", type=int, default=None)
    p.add_argument("--size", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("experiment", help="run one named experiment")
    p.add_argument("name", choices=EXPERIMENT_NAMES)
    p.add_argument("--spec", default=None,
                   help="JSON spec file; flags override its fields")
    p.add_argument("--manifest", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--cell-size", dest="cell_size", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--image-size", dest="image_size", type=int, default=None)
    p.add_argument("--per-class", dest="per_class", type=int, default=None)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("export-components",
                       help="project feature rows through a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--test", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=3)
    p.set_defaults(func=cmd_export_components)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
