"""Labeled sample collections on disk.

A file-backed dataset is a directory::

    <dir>/manifest.json     name, timestamps, per-label stats, features
    <dir>/records.json      one entry per sample (sha256-keyed)
    <dir>/features.yaml     snapshot of the derived-feature declarations
    <dir>/files/<sha256>    sample bytes

The fileless form drops ``files/`` and stores the computed feature
matrix as ``features.csv`` so datasets stay small enough to publish.

Labels are free-form packer names; ``not-packed`` is the one reserved
label. A label is only ever assigned from an explicit source: a labels
map, the clean-folder flag, or a packer actually applied by this
toolkit. Nothing here guesses.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import random
import shutil
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from filelock import FileLock

from packlab import corpus
from packlab.binfmt import ExecFormat, parse
from packlab.config import FEATURES_FILE, conf_path
from packlab.dataset.features import (
    DerivedFeature,
    extract_features,
    feature_descriptions,
    load_feature_registry,
)
from packlab.errors import (
    AllPackingFailed,
    EmptySourcePool,
    LabelConflict,
    MissingFeature,
    PackingFailed,
    PackLabError,
    UnlabeledSample,
)
from packlab.pack.packer import PackerSpec, apply

log = logging.getLogger(__name__)

NOT_PACKED = "not-packed"

__all__ = ["NOT_PACKED", "SampleRecord", "Dataset", "FilelessDataset",
           "open_dataset", "merge", "split", "FeatureMatrix"]


def _now() -> str:
    """ISO timestamp; honours SOURCE_DATE_EPOCH for reproducible runs."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    stamp = int(epoch) if epoch else int(time.time())
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(stamp))


def _dump_json(path: Path, obj) -> None:
    path.write_text(
        json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


@dataclass
class SampleRecord:
    sha256: str
    filename: str
    format: str
    size: int
    label: str
    source: dict = field(default_factory=lambda: {"kind": "ingested"})

    @property
    def packed(self) -> bool:
        return self.label != NOT_PACKED

    def to_json(self) -> dict:
        return {
            "sha256": self.sha256, "filename": self.filename,
            "format": self.format, "size": self.size,
            "label": self.label, "source": self.source,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SampleRecord":
        return cls(**doc)


@dataclass
class FeatureMatrix:
    names: list[str]
    shas: list[str]
    labels: list[str]
    values: np.ndarray  # (n_samples, n_features) float64

    @property
    def packed_bits(self) -> np.ndarray:
        return np.array([1 if lb != NOT_PACKED else 0 for lb in self.labels])


def _resolve_formats(format_spec) -> list[ExecFormat]:
    if format_spec is None:
        return list(ExecFormat)
    if isinstance(format_spec, ExecFormat):
        return [format_spec]
    token = str(format_spec).upper()
    if token == "ALL":
        return list(ExecFormat)
    if token in ("PE", "ELF"):
        return [f for f in ExecFormat if f.family == token]
    return [ExecFormat(token)]


class Dataset:
    """File-backed labeled sample collection."""

    fileless = False

    def __init__(self, path: Path):
        self.path = Path(path)
        self.records: list[SampleRecord] = []
        self.manifest: dict = {}

    # -- lifecycle -----------------------------------------------------------

    @classmethod
    def create(cls, path, name: str | None = None) -> "Dataset":
        ds = cls(Path(path))
        if ds.manifest_path.exists():
            raise PackLabError(f"dataset already exists at {ds.path}")
        ds.path.mkdir(parents=True, exist_ok=True)
        ds.files_dir.mkdir(exist_ok=True)
        snapshot = conf_path(FEATURES_FILE)
        if snapshot.exists():
            shutil.copyfile(snapshot, ds.features_file)
        ds.manifest = {
            "name": name or ds.path.name,
            "created": _now(),
            "updated": _now(),
            "fileless": False,
        }
        ds.save()
        return ds

    @classmethod
    def load(cls, path) -> "Dataset":
        ds = cls(Path(path))
        if not ds.manifest_path.exists():
            raise PackLabError(f"no dataset at {ds.path}")
        ds.manifest = json.loads(ds.manifest_path.read_text(encoding="utf-8"))
        if ds.records_path.exists():
            ds.records = [
                SampleRecord.from_json(doc)
                for doc in json.loads(ds.records_path.read_text(encoding="utf-8"))
            ]
        return ds

    @property
    def name(self) -> str:
        return self.manifest.get("name", self.path.name)

    @property
    def manifest_path(self) -> Path:
        return self.path / "manifest.json"

    @property
    def records_path(self) -> Path:
        return self.path / "records.json"

    @property
    def features_file(self) -> Path:
        return self.path / "features.yaml"

    @property
    def files_dir(self) -> Path:
        return self.path / "files"

    def lock(self) -> FileLock:
        return FileLock(str(self.path / ".lock"))

    # -- persistence ---------------------------------------------------------

    def _aggregate(self) -> dict:
        labels: dict[str, dict] = {}
        for rec in self.records:
            agg = labels.setdefault(rec.label, {"count": 0, "bytes": 0})
            agg["count"] += 1
            agg["bytes"] += rec.size
        return labels

    def save(self) -> None:
        self.manifest["updated"] = _now()
        self.manifest["fileless"] = self.fileless
        self.manifest["labels"] = self._aggregate()
        self.manifest["formats"] = sorted({r.format for r in self.records})
        self.manifest["samples"] = len(self.records)
        self.manifest["features"] = feature_descriptions(self.derived_features())
        _dump_json(self.manifest_path, self.manifest)
        _dump_json(self.records_path, [r.to_json() for r in self.records])
        self.check_consistency()

    def check_consistency(self) -> None:
        """Manifest statistics must equal the record-table aggregation."""
        assert self.manifest["labels"] == self._aggregate()
        assert self.manifest["samples"] == len(self.records)

    def derived_features(self) -> list[DerivedFeature]:
        if self.features_file.exists():
            return load_feature_registry(self.features_file)
        return load_feature_registry()

    # -- record handling -----------------------------------------------------

    def _record_by_sha(self, sha: str) -> SampleRecord | None:
        for rec in self.records:
            if rec.sha256 == sha:
                return rec
        return None

    def _add_sample(self, data: bytes, filename: str, label: str,
                    source: dict | None = None) -> SampleRecord | None:
        """Parse, dedup and store one sample; None when deduplicated."""
        exe = parse(data)
        existing = self._record_by_sha(exe.sha256)
        if existing is not None:
            log.warning("duplicate ignored: %s (%s)", filename, exe.sha256[:12])
            return None
        rec = SampleRecord(
            sha256=exe.sha256,
            filename=filename,
            format=exe.format.value,
            size=exe.size,
            label=label,
            source=source or {"kind": "ingested"},
        )
        self.records.append(rec)
        if not self.fileless:
            (self.files_dir / exe.sha256).write_bytes(data)
        return rec

    def sample_bytes(self, rec: SampleRecord) -> bytes:
        if self.fileless:
            raise PackLabError("fileless dataset keeps no sample bytes")
        return (self.files_dir / rec.sha256).read_bytes()

    def iter_executables(self):
        for rec in self.records:
            yield rec, parse(self.sample_bytes(rec))

    # -- operations ----------------------------------------------------------

    def update(self, source_dir, labels: dict[str, str] | None = None,
               not_packed: bool = False) -> list[SampleRecord]:
        """Ingest every parseable file under ``source_dir``.

        Labels come from the sha256->label map; without a map entry the
        file is labeled not-packed only when the clean-folder flag is
        set, otherwise ingestion fails rather than mislabel.
        """
        source = Path(source_dir)
        if not source.is_dir():
            raise PackLabError(f"source directory {source} not found")
        added = []
        with self.lock():
            for path in sorted(p for p in source.rglob("*") if p.is_file()):
                data = path.read_bytes()
                try:
                    exe = parse(data)
                except PackLabError as exc:
                    log.warning("skipping %s: %s", path.name, exc)
                    continue
                if labels and exe.sha256 in labels:
                    label = labels[exe.sha256]
                elif not_packed:
                    label = NOT_PACKED
                else:
                    raise UnlabeledSample(
                        f"{path.name} ({exe.sha256[:12]}) has no label; "
                        "pass a labels map or the not-packed flag"
                    )
                rec = self._add_sample(data, path.name, label)
                if rec is not None:
                    added.append(rec)
            self.save()
        return added

    def make(self, n: int, format="PE", packers: list[PackerSpec] | None = None,
             pack_all: bool = False, seed: int = 0,
             source_dir=None) -> list[SampleRecord]:
        """Generate ``n`` samples from clean sources, packing all of them
        or a seeded Bernoulli(0.5) half.

        Clean sources come from ``source_dir`` when given, otherwise
        from the built-in synthetic corpus. Packed emissions rotate
        round-robin over the packer specs and their variants; each
        packed record's label is the spec actually applied.
        """
        if n < 2:
            raise PackLabError(f"cannot make a dataset of {n} samples")
        if not packers:
            raise PackLabError("at least one packer spec required")
        formats = _resolve_formats(format)
        rng = random.Random(seed)

        pool: list[tuple[str, bytes]] = []
        if source_dir is not None:
            for path in sorted(p for p in Path(source_dir).rglob("*") if p.is_file()):
                data = path.read_bytes()
                try:
                    exe = parse(data)
                except PackLabError:
                    continue
                if exe.format in formats:
                    pool.append((path.name, data))
            if not pool:
                raise EmptySourcePool(
                    f"no usable {format} samples under {source_dir}"
                )

        def draw_clean(index: int) -> tuple[str, bytes]:
            if pool:
                return pool[rng.randrange(len(pool))]
            fmt = rng.choice(formats)
            sub = rng.randrange(1 << 30)
            return (
                f"synthetic-{fmt.value.lower()}-{sub:08x}",
                corpus.generate_clean(fmt, seed=sub),
            )

        candidates = [c for spec in packers for c in spec.candidates()]
        fresh_pool = list(pool)
        rng.shuffle(fresh_pool)

        added: list[SampleRecord] = []
        cursor = 0
        pack_attempts = pack_successes = 0
        with self.lock():
            for i in range(n):
                do_pack = True if pack_all else rng.random() < 0.5
                if not do_pack:
                    if pool:
                        if not fresh_pool:
                            raise EmptySourcePool(
                                "clean source pool exhausted before reaching n"
                            )
                        fname, data = fresh_pool.pop()
                    else:
                        fname, data = draw_clean(i)
                    rec = self._add_sample(data, fname, NOT_PACKED)
                    if rec is not None:
                        added.append(rec)
                    continue

                pack_attempts += 1
                fname, data = draw_clean(i)
                exe = parse(data)
                packed_rec = None
                for attempt in range(len(candidates)):
                    spec, variant = candidates[(cursor + attempt) % len(candidates)]
                    if exe.format not in spec.formats:
                        continue
                    pack_seed = rng.randrange(1 << 32)
                    try:
                        result = apply(spec, exe, seed=pack_seed, variant=variant)
                    except PackingFailed as exc:
                        log.warning("%s on %s failed: %s", spec.name, fname, exc)
                        continue
                    packed_rec = self._add_sample(
                        result.data,
                        f"{fname}.{result.label}",
                        result.label,
                        source={
                            "kind": "generated", "packer": spec.name,
                            "variant": variant, "seed": pack_seed,
                        },
                    )
                    cursor += attempt + 1
                    break
                if packed_rec is not None:
                    pack_successes += 1
                    added.append(packed_rec)
            if pack_attempts and not pack_successes:
                raise AllPackingFailed(
                    f"all {pack_attempts} packing attempts failed"
                )
            self.save()
        return added

    # -- inspection ----------------------------------------------------------

    def show(self) -> "ShowReport":
        rows = []
        for label, agg in sorted(
            self._aggregate().items(), key=lambda kv: (kv[0] == NOT_PACKED, kv[0])
        ):
            formats = sorted({r.format for r in self.records if r.label == label})
            rows.append(ShowRow(
                label=label, count=agg["count"], bytes=agg["bytes"],
                formats=formats,
            ))
        return ShowReport(name=self.name, fileless=self.fileless, rows=rows)

    # -- features ------------------------------------------------------------

    def feature_frame(self, features: list[str] | None = None) -> FeatureMatrix:
        """Feature matrix for all samples, computed from the files."""
        derived = self.derived_features()
        names: list[str] | None = None
        rows, shas, labels = [], [], []
        for rec, exe in self.iter_executables():
            vec = extract_features(exe, derived)
            if names is None:
                names = list(vec) if features is None else list(features)
            missing = [f for f in names if f not in vec]
            if missing:
                raise MissingFeature(f"features {missing} not extractable")
            rows.append([vec[f] for f in names])
            shas.append(rec.sha256)
            labels.append(rec.label)
        if names is None:
            names = []
        return FeatureMatrix(
            names=names, shas=shas, labels=labels,
            values=np.array(rows, dtype=np.float64).reshape(len(rows), len(names)),
        )

    def to_fileless(self, features: list[str] | None = None) -> "FilelessDataset":
        """Convert in place: store the feature matrix, drop the files."""
        frame = self.feature_frame(features)
        with self.lock():
            out = self.path / "features.csv"
            with open(out, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["sha256", "label", *frame.names])
                for sha, label, row in zip(frame.shas, frame.labels, frame.values):
                    writer.writerow([sha, label, *[repr(float(v)) for v in row]])
            if self.files_dir.exists():
                shutil.rmtree(self.files_dir)
            fl = FilelessDataset(self.path)
            fl.records = self.records
            fl.manifest = self.manifest
            fl.save()
        return fl


class FilelessDataset(Dataset):
    """Dataset holding feature vectors and metadata, no sample bytes."""

    fileless = True

    @property
    def matrix_path(self) -> Path:
        return self.path / "features.csv"

    def feature_frame(self, features: list[str] | None = None) -> FeatureMatrix:
        with open(self.matrix_path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            names = header[2:]
            shas, labels, rows = [], [], []
            for row in reader:
                shas.append(row[0])
                labels.append(row[1])
                rows.append([float(v) for v in row[2:]])
        values = np.array(rows, dtype=np.float64).reshape(len(rows), len(names))
        if features is not None:
            missing = [f for f in features if f not in names]
            if missing:
                raise MissingFeature(f"dataset lacks features {missing}")
            idx = [names.index(f) for f in features]
            names, values = list(features), values[:, idx]
        return FeatureMatrix(names=names, shas=shas, labels=labels, values=values)

    def update(self, *a, **kw):  # pragma: no cover - guard
        raise PackLabError("fileless datasets cannot ingest new files")

    def make(self, *a, **kw):  # pragma: no cover - guard
        raise PackLabError("fileless datasets cannot generate samples")

    def to_fileless(self, features=None) -> "FilelessDataset":
        return self


def open_dataset(path) -> Dataset:
    """Open a dataset directory as the right flavor."""
    manifest_path = Path(path) / "manifest.json"
    if not manifest_path.exists():
        raise PackLabError(f"no dataset at {path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    cls = FilelessDataset if manifest.get("fileless") else Dataset
    return cls.load(path)


def merge(a: Dataset, b: Dataset, path, name: str | None = None) -> Dataset:
    """New dataset with the union of both record sets.

    Samples are deduplicated by sha256; the same hash under two labels
    is a conflict. Merging a dataset with itself is the identity.
    """
    if a.fileless != b.fileless:
        raise PackLabError("cannot merge file-backed with fileless datasets")
    if a.fileless:
        return _merge_fileless(a, b, path, name)
    out = Dataset.create(path, name=name)
    with out.lock():
        for src in (a, b):
            for rec in src.records:
                existing = out._record_by_sha(rec.sha256)
                if existing is not None:
                    if existing.label != rec.label:
                        raise LabelConflict(
                            f"{rec.sha256[:12]}: {existing.label!r} vs {rec.label!r}"
                        )
                    continue
                out.records.append(SampleRecord.from_json(rec.to_json()))
                shutil.copyfile(src.files_dir / rec.sha256, out.files_dir / rec.sha256)
        out.save()
    return out


def _merge_fileless(a, b, path, name):
    fa, fb = a.feature_frame(), b.feature_frame()
    if fa.names != fb.names:
        raise MissingFeature("fileless datasets declare different feature sets")
    out = Dataset.create(path, name=name)
    seen_label: dict[str, str] = {}
    rows: dict[str, tuple[str, np.ndarray]] = {}
    for src, frame in ((a, fa), (b, fb)):
        for rec in src.records:
            if rec.sha256 in seen_label:
                if seen_label[rec.sha256] != rec.label:
                    raise LabelConflict(
                        f"{rec.sha256[:12]}: {seen_label[rec.sha256]!r} vs {rec.label!r}"
                    )
                continue
            seen_label[rec.sha256] = rec.label
            out.records.append(SampleRecord.from_json(rec.to_json()))
        for sha, label, row in zip(frame.shas, frame.labels, frame.values):
            rows.setdefault(sha, (label, row))
    with open(out.path / "features.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sha256", "label", *fa.names])
        for rec in out.records:
            label, row = rows[rec.sha256]
            writer.writerow([rec.sha256, label, *[repr(float(v)) for v in row]])
    shutil.rmtree(out.files_dir)
    fl = FilelessDataset(out.path)
    fl.records, fl.manifest = out.records, out.manifest
    fl.save()
    return fl


def split(ds: Dataset, path_a, path_b, ratio: float | None = None,
          labels: list[str] | None = None, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Partition into two disjoint, exhaustive datasets.

    Either by seeded shuffle at ``ratio`` (first part gets
    ``round(ratio * n)`` records) or by label membership. Works on
    file-backed and fileless datasets alike.
    """
    if (ratio is None) == (labels is None):
        raise PackLabError("split needs exactly one of ratio or labels")
    if ratio is not None and not 0 < ratio < 1:
        raise PackLabError(f"ratio {ratio} outside (0, 1)")

    if ratio is not None:
        order = list(ds.records)
        random.Random(seed).shuffle(order)
        cut = round(ratio * len(order))
        part_a, part_b = order[:cut], order[cut:]
    else:
        wanted = set(labels)
        part_a = [r for r in ds.records if r.label in wanted]
        part_b = [r for r in ds.records if r.label not in wanted]

    frame = ds.feature_frame() if ds.fileless else None
    out = []
    for path, part in ((path_a, part_a), (path_b, part_b)):
        sub = Dataset.create(path)
        with sub.lock():
            for rec in part:
                sub.records.append(SampleRecord.from_json(rec.to_json()))
                if frame is None:
                    shutil.copyfile(ds.files_dir / rec.sha256,
                                    sub.files_dir / rec.sha256)
            if frame is None:
                sub.save()
                out.append(sub)
                continue
            row_by_sha = dict(zip(frame.shas, frame.values))
            with open(sub.path / "features.csv", "w", newline="",
                      encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["sha256", "label", *frame.names])
                for rec in sub.records:
                    writer.writerow([
                        rec.sha256, rec.label,
                        *[repr(float(v)) for v in row_by_sha[rec.sha256]],
                    ])
            shutil.rmtree(sub.files_dir)
            fl = FilelessDataset(sub.path)
            fl.records, fl.manifest = sub.records, sub.manifest
            fl.save()
            out.append(fl)
    return out[0], out[1]


# -- show report ---------------------------------------------------------------

def human_size(n: int) -> str:
    if n < 1024:
        return f"{n}B"
    if n < 1024 * 1024:
        return f"{round(n / 1024)}KB"
    if n < 1024 * 1024 * 1024:
        return f"{round(n / (1024 * 1024))}MB"
    return f"{round(n / (1024 * 1024 * 1024))}GB"


@dataclass
class ShowRow:
    label: str
    count: int
    bytes: int
    formats: list[str]

    def cells(self) -> tuple[str, str, str, str]:
        return (self.label, str(self.count), human_size(self.bytes),
                ",".join(self.formats))


@dataclass
class ShowReport:
    name: str
    fileless: bool
    rows: list[ShowRow]

    def to_markdown(self) -> str:
        head = f"# {self.name}" + (" (fileless)" if self.fileless else "")
        lines = [head, "",
                 "| Label | #Executables | Size | Formats |",
                 "|---|---|---|---|"]
        for row in self.rows:
            lines.append("| " + " | ".join(row.cells()) + " |")
        total = sum(r.count for r in self.rows)
        size = human_size(sum(r.bytes for r in self.rows))
        lines += ["", f"Total: {total} samples, {size}"]
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "fileless": self.fileless,
            "rows": [
                {"label": r.label, "count": r.count, "bytes": r.bytes,
                 "formats": r.formats}
                for r in self.rows
            ],
        }
