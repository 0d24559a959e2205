"""Command-line interface.

Five tools under one entry point::

    packlab dataset    {update,make,show,merge,split,convert}
    packlab detector   <target> -d NAME [-d NAME ...] [-m] [-b] [-w]
    packlab packer     <spec> <file> [--variant V] [--seed N]
    packlab model      {train,test,show}
    packlab visualizer plot <file> <dataset> -l LABEL [-l LABEL ...]

Exit codes: 0 success, 1 domain error (no traceback), 2 usage error.
Every command touching randomness takes --seed and is reproducible
under it.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from packlab import bench as _bench
from packlab import viz as _viz
from packlab.binfmt import parse_file
from packlab.config import PACKERS_FILE, conf_path
from packlab.dataset import Dataset, merge as merge_datasets, open_dataset, split as split_dataset
from packlab.detect import SuperDetector, load_detectors
from packlab.errors import PackLabError
from packlab.model import dump as dump_model
from packlab.model import get_algorithm, load as load_model, rank_features
from packlab.model import test as test_model, train as train_model
from packlab.pack import apply as apply_packer, load_packers


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help()
        return 2
    try:
        return args.func(args) or 0
    except PackLabError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"ValueError: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="packlab",
        description="Toolkit for studying executable packing.",
    )
    sub = parser.add_subparsers(dest="tool")

    # -- dataset ---------------------------------------------------------
    ds = sub.add_parser("dataset", help="create and manipulate datasets")
    ds_sub = ds.add_subparsers(dest="command")

    p = ds_sub.add_parser("update", help="ingest samples from a folder")
    p.add_argument("dataset")
    p.add_argument("-s", "--source", required=True, help="folder of samples")
    p.add_argument("-l", "--labels", help="JSON file mapping sha256 to label")
    p.add_argument("--not-packed", action="store_true",
                   help="label unmapped samples as clean")
    p.set_defaults(func=_cmd_dataset_update)

    p = ds_sub.add_parser("make", help="generate labeled samples by packing")
    p.add_argument("dataset")
    p.add_argument("-n", "--number", type=int, required=True)
    p.add_argument("-f", "--format", default="PE")
    p.add_argument("-p", "--packer", action="append", default=[],
                   help="packer spec name (repeatable; default: all)")
    p.add_argument("--pack-all", action="store_true")
    p.add_argument("-s", "--source", help="clean sample folder (default: synthetic)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_dataset_make)

    p = ds_sub.add_parser("show", help="dataset statistics")
    p.add_argument("dataset")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_dataset_show)

    p = ds_sub.add_parser("merge", help="merge two datasets into a new one")
    p.add_argument("output")
    p.add_argument("first")
    p.add_argument("second")
    p.set_defaults(func=_cmd_dataset_merge)

    p = ds_sub.add_parser("split", help="split a dataset in two")
    p.add_argument("dataset")
    p.add_argument("out_a")
    p.add_argument("out_b")
    p.add_argument("--ratio", type=float)
    p.add_argument("--labels", help="comma-separated labels for the first part")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_dataset_split)

    p = ds_sub.add_parser("convert", help="convert to a fileless dataset")
    p.add_argument("dataset")
    p.add_argument("--features", help="comma-separated feature subset")
    p.set_defaults(func=_cmd_dataset_convert)

    # -- detector --------------------------------------------------------
    p = sub.add_parser("detector", help="run detectors over a dataset or file")
    p.add_argument("target", help="dataset directory or single executable")
    p.add_argument("-d", "--detector", action="append", default=[],
                   help="detector name (repeatable; several vote together)")
    p.add_argument("-m", "--metrics", action="store_true",
                   help="collect accuracy metrics against dataset labels")
    p.add_argument("-b", "--binary", action="store_true",
                   help="binary classification only")
    p.add_argument("-w", "--weak", action="store_true", help="enable weak mode")
    p.add_argument("--bench", action="store_true",
                   help="full report: accuracy, timing, complexity")
    p.add_argument("--csv", action="store_true", help="emit the report as CSV")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_detector)

    # -- packer ----------------------------------------------------------
    p = sub.add_parser("packer", help="apply a packer spec to one file")
    p.add_argument("spec")
    p.add_argument("file")
    p.add_argument("--variant")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", help="output path (default FILE.LABEL)")
    p.set_defaults(func=_cmd_packer)

    # -- model -----------------------------------------------------------
    mdl = sub.add_parser("model", help="train, test and inspect models")
    mdl_sub = mdl.add_subparsers(dest="command")

    p = mdl_sub.add_parser("train")
    p.add_argument("dataset")
    p.add_argument("-a", "--algorithm", default="dt")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--models-dir", default="models")
    p.set_defaults(func=_cmd_model_train)

    p = mdl_sub.add_parser("test")
    p.add_argument("model", help="model name or dump path")
    p.add_argument("dataset")
    p.add_argument("--models-dir", default="models")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_model_test)

    p = mdl_sub.add_parser("show")
    p.add_argument("model", help="model name or dump path")
    p.add_argument("--models-dir", default="models")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_model_show)

    # -- visualizer --------------------------------------------------------
    vz = sub.add_parser("visualizer", help="plot section entropy")
    vz_sub = vz.add_subparsers(dest="command")
    p = vz_sub.add_parser("plot")
    p.add_argument("file", help="sample filename inside the dataset")
    p.add_argument("dataset", help="dataset directory (label-named subfolders)")
    p.add_argument("-l", "--label", action="append", default=[], required=False,
                   help="label subfolder to take the sample from (repeatable)")
    p.add_argument("--block-size", type=int, default=256)
    p.add_argument("-o", "--output", help="output SVG path (default FILE.svg)")
    p.set_defaults(func=_cmd_visualizer_plot)

    return parser


# -- dataset commands --------------------------------------------------------


def _cmd_dataset_update(args) -> int:
    path = Path(args.dataset)
    ds = open_dataset(path) if (path / "manifest.json").exists() else Dataset.create(path)
    labels = None
    if args.labels:
        labels = json.loads(Path(args.labels).read_text(encoding="utf-8"))
    added = ds.update(args.source, labels=labels, not_packed=args.not_packed)
    print(f"{ds.name}: {len(added)} samples added, {len(ds.records)} total")
    return 0


def _cmd_dataset_make(args) -> int:
    path = Path(args.dataset)
    ds = open_dataset(path) if (path / "manifest.json").exists() else Dataset.create(path)
    registry = load_packers(conf_path(PACKERS_FILE))
    names = args.packer or list(registry)
    missing = [n for n in names if n not in registry]
    if missing:
        raise PackLabError(f"unknown packer(s): {', '.join(missing)}")
    added = ds.make(
        args.number,
        format=args.format,
        packers=[registry[n] for n in names],
        pack_all=args.pack_all,
        seed=args.seed,
        source_dir=args.source,
    )
    packed = sum(1 for r in added if r.packed)
    print(f"{ds.name}: {len(added)} samples added ({packed} packed), "
          f"{len(ds.records)} total")
    return 0


def _cmd_dataset_show(args) -> int:
    report = open_dataset(args.dataset).show()
    print(json.dumps(report.to_json(), indent=2) if args.json else report.to_markdown())
    return 0


def _cmd_dataset_merge(args) -> int:
    a = open_dataset(args.first)
    b = open_dataset(args.second)
    out = merge_datasets(a, b, args.output)
    print(f"{out.name}: {len(out.records)} samples")
    return 0


def _cmd_dataset_split(args) -> int:
    ds = open_dataset(args.dataset)
    labels = args.labels.split(",") if args.labels else None
    a, b = split_dataset(ds, args.out_a, args.out_b, ratio=args.ratio,
                         labels=labels, seed=args.seed)
    print(f"{a.name}: {len(a.records)} samples / {b.name}: {len(b.records)} samples")
    return 0


def _cmd_dataset_convert(args) -> int:
    ds = open_dataset(args.dataset)
    features = args.features.split(",") if args.features else None
    fl = ds.to_fileless(features)
    print(f"{fl.name}: fileless, {len(fl.records)} samples, "
          f"{len(fl.feature_frame().names)} features")
    return 0


# -- detector command ----------------------------------------------------------


def _pick_detectors(names: list[str]):
    registry = load_detectors()
    if not names:
        raise PackLabError(
            f"pass -d with one of: {', '.join(registry)} (repeat -d to vote)"
        )
    missing = [n for n in names if n not in registry]
    if missing:
        raise PackLabError(f"unknown detector(s): {', '.join(missing)}")
    picked = [registry[n] for n in names]
    if len(picked) == 1:
        return picked[0]
    return SuperDetector(picked)


def _cmd_detector(args) -> int:
    detector = _pick_detectors(args.detector)
    target = Path(args.target)

    if target.is_file():
        exe = parse_file(target)
        mode = "weak" if args.weak else "strong"
        classes = "binary" if args.binary else (
            "multiclass" if detector.multiclass else "binary"
        )
        verdict = detector.run(exe, mode=mode, classes=classes)
        label = f" ({verdict.label})" if verdict.label else ""
        print(f"{target.name}: {verdict.decision.value}{label} "
              f"[{verdict.strength}]")
        for line in verdict.traces:
            print(f"  trace: {line}")
        for line in verdict.suspicions:
            print(f"  suspicion: {line}")
        return 0

    ds = open_dataset(target)
    if args.bench:
        report = _bench.bench_report([detector], ds)
        print(report.to_csv() if args.csv else report.to_markdown())
        return 0
    if not args.metrics:
        raise PackLabError("bulk detection needs -m (metrics) or --bench")
    wanted_classes = ("binary",) if args.binary else ("binary", "multiclass")
    wanted_modes = ("weak",) if args.weak else ("strong", "weak")
    report = _bench.evaluate_accuracy(
        detector, ds, classes=wanted_classes, modes=wanted_modes
    )
    if args.json:
        doc = {
            "detector": report.detector,
            "cells": {
                f"{c}/{m}": None if cell is None else {
                    "accuracy_low": cell.pessimistic,
                    "accuracy_high": cell.optimistic,
                    "undecided": cell.undecided,
                    "n": cell.n,
                }
                for (c, m), cell in report.cells.items()
            },
            "lower_bound": report.lower_bound,
            "upper_bound": report.upper_bound,
            "false_positive_rate": report.false_positive_rate,
        }
        print(json.dumps(doc, indent=2))
        return 0
    print(f"Accuracy of {report.detector} on {ds.name}:")
    print("| Classes | Mode | Accuracy | Undecided |")
    print("|---|---|---|---|")
    for (classes, mode), cell in report.cells.items():
        if cell is None:
            print(f"| {classes} | {mode} | unsupported | |")
            continue
        acc = (
            f"{cell.pessimistic * 100:.2f}%"
            if cell.pessimistic == cell.optimistic
            else f"{cell.pessimistic * 100:.2f}%-{cell.optimistic * 100:.2f}%"
        )
        print(f"| {classes} | {mode} | {acc} | {cell.undecided} |")
    print(f"\nBounds: {report.lower_bound * 100:.2f}%-{report.upper_bound * 100:.2f}%")
    if report.false_positive_rate is not None:
        print(f"FPR: {report.false_positive_rate * 100:.2f}%")
    return 0


# -- packer command --------------------------------------------------------------


def _cmd_packer(args) -> int:
    registry = load_packers(conf_path(PACKERS_FILE))
    if args.spec not in registry:
        raise PackLabError(f"unknown packer {args.spec!r}; "
                           f"available: {', '.join(registry)}")
    exe = parse_file(args.file)
    result = apply_packer(registry[args.spec], exe, seed=args.seed,
                          variant=args.variant)
    out = Path(args.output) if args.output else Path(f"{args.file}.{result.label}")
    out.write_bytes(result.data)
    print(f"{result.label}: {out} ({len(result.data)} bytes)")
    return 0


# -- model commands ---------------------------------------------------------------


def _print_metrics_table(title: str, rows: dict[str, object]) -> None:
    print(title)
    header = ("",) + tuple(h for h in next(iter(rows.values())).HEADER)
    widths = [max(6, len(h)) for h in header]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for name, record in rows.items():
        cells = (name,) + record.cells()
        print("  ".join(c.ljust(w) for c, w in zip(cells, widths)))


def _cmd_model_train(args) -> int:
    ds = open_dataset(args.dataset)
    algo = get_algorithm(args.algorithm)
    model = train_model(ds, algo, seed=args.seed)
    models_dir = Path(args.models_dir)
    models_dir.mkdir(parents=True, exist_ok=True)
    path = dump_model(model, models_dir / f"{model.name}.json")
    print(f"Name: {model.name}")
    _print_metrics_table(
        "", {"Train": model.metrics["train"], "Test": model.metrics["test"]}
    )
    print(f"Dump: {path}")
    return 0


def _resolve_model(token: str, models_dir: str):
    path = Path(token)
    if path.exists():
        return load_model(path)
    candidate = Path(models_dir) / f"{token}.json"
    if candidate.exists():
        return load_model(candidate)
    raise PackLabError(f"no model at {token!r} or {candidate}")


def _cmd_model_test(args) -> int:
    model = _resolve_model(args.model, args.models_dir)
    ds = open_dataset(args.dataset)
    record = test_model(model, ds)
    if args.json:
        print(json.dumps(record.to_json(), indent=2))
        return 0
    print(f"Test results for: {ds.name}")
    _print_metrics_table("", {"Test": record})
    for flag in record.flags:
        print(f"  note: {flag}")
    return 0


def _cmd_model_show(args) -> int:
    model = _resolve_model(args.model, args.models_dir)
    ranking = rank_features(model)
    if args.json:
        print(json.dumps({
            "name": model.name,
            "algorithm": model.algorithm,
            "kind": model.kind,
            "hyperparameters": model.hyperparams,
            "features": model.feature_names,
            "importances": ranking,
            "metrics": {k: m.to_json() for k, m in model.metrics.items()},
        }, indent=2))
        return 0
    print(f"Name: {model.name}")
    print(f"Algorithm: {model.algorithm} ({model.kind})")
    print(f"Hyperparameters: {model.hyperparams}")
    print(f"Features ({len(model.feature_names)}):")
    if ranking:
        for name, importance in ranking:
            print(f"  {importance:8.4f}  {name}")
    else:
        for name in model.feature_names:
            print(f"  {name}")
        print("  (no importance ranking for this algorithm kind)")
    return 0


# -- visualizer command ---------------------------------------------------------


def _find_labeled_sample(root: Path, filename: str, label: str) -> bytes:
    """Resolve a sample by label, either from a toolkit dataset or from
    a plain folder tree whose subfolders are named by label."""
    if (root / "manifest.json").exists():
        ds = open_dataset(root)
        for rec in ds.records:
            if rec.filename == filename and rec.label == label:
                return ds.sample_bytes(rec)
        raise PackLabError(
            f"dataset {ds.name} holds no sample {filename!r} labeled {label!r}"
        )
    for path in sorted(root.rglob(filename)):
        if label in path.parent.parts:
            return path.read_bytes()
    raise PackLabError(f"no {filename!r} under a {label!r} folder in {root}")


def _cmd_visualizer_plot(args) -> int:
    root = Path(args.dataset)
    labels = args.label or ["not-packed"]
    samples = [
        (label, _find_labeled_sample(root, args.file, label)) for label in labels
    ]
    doc = _viz.plot_samples(samples, block_size=args.block_size)
    out = Path(args.output) if args.output else Path(f"{Path(args.file).name}.svg")
    doc.save(out)
    print(out)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
