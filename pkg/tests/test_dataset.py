"""Dataset lifecycle: ingestion, generation, merge/split, features."""

import json

import numpy as np
import pytest

from packlab.binfmt import parse
from packlab.corpus import generate_pool
from packlab.dataset import (
    NOT_PACKED,
    Dataset,
    SampleRecord,
    extract_features,
    human_size,
    load_feature_registry,
    merge,
    open_dataset,
    split,
)
from packlab.dataset.features import DerivedFeature, _eval_expr
from packlab.errors import (
    AllPackingFailed,
    EmptySourcePool,
    LabelConflict,
    MissingFeature,
    PackLabError,
    UnknownFeature,
    UnlabeledSample,
)
from packlab.model import drop_null_variance
from packlab.pack import PackerCategory, PackerSpec, SectionPlan, expand_formats

from conftest import build_pe_fixture


@pytest.fixture
def clean_dir(tmp_path):
    src = tmp_path / "clean"
    src.mkdir()
    for i, data in enumerate(generate_pool(5, "PE32", seed=10)):
        (src / f"sample{i}.exe").write_bytes(data)
    return src


class TestUpdate:
    def test_clean_folder_flag(self, tmp_path, clean_dir):
        ds = Dataset.create(tmp_path / "ds")
        added = ds.update(clean_dir, not_packed=True)
        assert len(added) == 5
        assert all(r.label == NOT_PACKED for r in added)

    def test_labels_map_by_sha256(self, tmp_path, clean_dir):
        data = (clean_dir / "sample0.exe").read_bytes()
        sha = parse(data).sha256
        ds = Dataset.create(tmp_path / "ds")
        added = ds.update(clean_dir, labels={sha: "upx"}, not_packed=True)
        by_sha = {r.sha256: r for r in added}
        assert by_sha[sha].label == "upx"
        assert sum(1 for r in added if r.label == NOT_PACKED) == 4

    def test_unlabeled_sample_rejected(self, tmp_path, clean_dir):
        ds = Dataset.create(tmp_path / "ds")
        with pytest.raises(UnlabeledSample):
            ds.update(clean_dir)

    def test_duplicate_ingestion_deduplicates(self, tmp_path, clean_dir):
        ds = Dataset.create(tmp_path / "ds")
        ds.update(clean_dir, not_packed=True)
        again = ds.update(clean_dir, not_packed=True)
        assert again == []
        assert len(ds.records) == 5

    def test_unparseable_files_skipped(self, tmp_path, clean_dir):
        (clean_dir / "junk.txt").write_bytes(b"not an executable")
        ds = Dataset.create(tmp_path / "ds")
        added = ds.update(clean_dir, not_packed=True)
        assert len(added) == 5


class TestMake:
    def test_pack_all(self, tmp_path, packers):
        ds = Dataset.create(tmp_path / "ds")
        added = ds.make(20, format="PE", packers=[packers["zipper"]],
                        pack_all=True, seed=3)
        assert len(added) == 20
        assert all(r.packed for r in added)
        assert all(r.source["kind"] == "generated" for r in added)

    def test_round_robin_covers_specs_and_variants(self, tmp_path, packers):
        ds = Dataset.create(tmp_path / "ds")
        added = ds.make(24, format="PE",
                        packers=[packers["zipper"], packers["xorcoder"]],
                        pack_all=True, seed=3)
        labels = {r.label for r in added}
        assert labels == {"zipper", "zipper-max", "zipper-light",
                          "xorcoder", "xorcoder-k7"}

    def test_balance_without_pack_all(self, tmp_path, packers):
        ds = Dataset.create(tmp_path / "ds")
        added = ds.make(200, format="PE", packers=[packers["zipper"]], seed=5)
        packed = sum(1 for r in added if r.packed)
        assert 0.40 <= packed / len(added) <= 0.60

    def test_source_dir_pool(self, tmp_path, packers, clean_dir):
        ds = Dataset.create(tmp_path / "ds")
        added = ds.make(10, format="PE", packers=[packers["zipper"]],
                        pack_all=True, seed=1, source_dir=clean_dir)
        assert len(added) == 10

    def test_empty_source_pool(self, tmp_path, packers):
        empty = tmp_path / "empty"
        empty.mkdir()
        ds = Dataset.create(tmp_path / "ds")
        with pytest.raises(EmptySourcePool):
            ds.make(4, format="PE", packers=[packers["zipper"]],
                    pack_all=True, seed=1, source_dir=empty)

    def test_all_packing_failed(self, tmp_path):
        broken = PackerSpec(
            name="broken",
            categories=frozenset({PackerCategory.ENCODER}),
            formats=expand_formats(["PE", "ELF"]),
            steps=[{"xor_encode_sections": {"key": 0}}],
        )
        ds = Dataset.create(tmp_path / "ds")
        with pytest.raises(AllPackingFailed):
            ds.make(10, format="PE", packers=[broken], pack_all=True, seed=1)

    def test_n_too_small(self, tmp_path, packers):
        ds = Dataset.create(tmp_path / "ds")
        with pytest.raises(PackLabError):
            ds.make(1, packers=[packers["zipper"]])

    def test_labels_match_ground_truth_only(self, tmp_path, packers):
        # every packed label names the spec that actually ran
        ds = Dataset.create(tmp_path / "ds")
        added = ds.make(16, format="ELF", packers=[packers["boxer"]],
                        pack_all=True, seed=9)
        assert {r.label for r in added} == {"boxer"}
        for rec in added:
            assert rec.source["packer"] == "boxer"


class TestMergeSplit:
    def _make(self, tmp_path, name, seed, packers):
        ds = Dataset.create(tmp_path / name)
        ds.make(12, format="PE", packers=[packers["zipper"]], seed=seed)
        return ds

    def test_merge_is_idempotent(self, tmp_path, packers):
        ds = self._make(tmp_path, "a", 1, packers)
        out = merge(ds, ds, tmp_path / "m")
        assert sorted(r.sha256 for r in out.records) == \
            sorted(r.sha256 for r in ds.records)

    def test_merge_unions_disjoint_sets(self, tmp_path, packers):
        a = self._make(tmp_path, "a", 1, packers)
        b = self._make(tmp_path, "b", 2, packers)
        out = merge(a, b, tmp_path / "m")
        assert len(out.records) == len(a.records) + len(b.records)
        out.check_consistency()

    def test_merge_label_conflict(self, tmp_path, packers):
        a = self._make(tmp_path, "a", 1, packers)
        b = Dataset.create(tmp_path / "b")
        rec = a.records[0]
        data = a.sample_bytes(rec)
        (tmp_path / "loose").mkdir()
        (tmp_path / "loose" / "x.bin").write_bytes(data)
        b.update(tmp_path / "loose", labels={rec.sha256: "different-label"})
        with pytest.raises(LabelConflict):
            merge(a, b, tmp_path / "m")

    def test_split_ratio_disjoint_exhaustive(self, tmp_path, packers):
        ds = Dataset.create(tmp_path / "ds")
        ds.make(100, format="PE", packers=[packers["zipper"]], seed=4)
        a, b = split(ds, tmp_path / "s1", tmp_path / "s2", ratio=0.8, seed=0)
        assert len(a.records) == 80 and len(b.records) == 20
        assert not ({r.sha256 for r in a.records} & {r.sha256 for r in b.records})

    def test_split_by_label(self, tmp_path, packers):
        ds = self._make(tmp_path, "a", 3, packers)
        a, b = split(ds, tmp_path / "s1", tmp_path / "s2", labels=[NOT_PACKED])
        assert all(r.label == NOT_PACKED for r in a.records)
        assert all(r.label != NOT_PACKED for r in b.records)
        assert len(a.records) + len(b.records) == len(ds.records)


class TestShow:
    def test_reference_style_row(self, tmp_path):
        # 122 UPX-packed PE32 samples totaling ~36 MB, as a registry row
        ds = Dataset.create(tmp_path / "ds", name="reference")
        per = round(36 * 1024 * 1024 / 122)
        for i in range(122):
            ds.records.append(SampleRecord(
                sha256=f"{i:064x}", filename=f"s{i}.exe", format="PE32",
                size=per, label="UPX",
            ))
        ds.save()
        row = next(r for r in ds.show().rows if r.label == "UPX")
        assert row.cells() == ("UPX", "122", "36MB", "PE32")

    def test_not_packed_sorts_last(self, tmp_path, packers):
        ds = Dataset.create(tmp_path / "ds")
        ds.make(16, format="PE", packers=[packers["zipper"]], seed=2)
        rows = ds.show().rows
        assert rows[-1].label == NOT_PACKED

    def test_human_size(self):
        assert human_size(500) == "500B"
        assert human_size(36 * 1024 * 1024) == "36MB"
        assert human_size(2048) == "2KB"


class TestFeatures:
    def test_all_zero_single_section_fixture(self):
        data = build_pe_fixture(
            sections=[SectionPlan(name=b".text", data=b"\x00" * 1024,
                                  executable=True)],
            entry=(0, 0),
        )
        vec = extract_features(parse(data))
        # the section is exactly zero; the whole file still carries headers
        assert vec["entry_section_entropy"] == 0.0
        assert vec["average_block_entropy"] < 1.0
        assert vec["unknown_section_name_ratio"] == 0.0
        assert vec["high_average_entropy"] == 0.0  # derived comparison

    def test_derived_expression_rejects_unknown_names(self):
        with pytest.raises(UnknownFeature):
            _eval_expr("no_such_feature > 1", {"size": 1.0})

    def test_derived_expression_rejects_calls(self):
        with pytest.raises(UnknownFeature):
            _eval_expr("__import__('os')", {})

    def test_derived_features_reference_earlier_derived(self, clean_pe):
        vec = extract_features(clean_pe)
        expected = float(bool(vec["mostly_unknown_names"])
                         and bool(vec["entry_in_last_section"]))
        assert vec["suspicious_layout"] == expected

    def test_vector_ordering_is_stable(self, clean_pe, clean_elf):
        assert list(extract_features(clean_pe)) == list(extract_features(clean_elf))

    def test_null_variance_filter_drops_constant_column(self, tmp_path, packers):
        ds = Dataset.create(tmp_path / "ds")
        ds.make(12, format="PE", packers=[packers["xorcoder"]], seed=8)
        frame = ds.feature_frame()
        constant = [
            i for i in range(frame.values.shape[1])
            if np.ptp(frame.values[:, i]) == 0.0
        ]
        kept = drop_null_variance(frame)
        assert len(kept.names) == len(frame.names) - len(constant)

    def test_registry_loads_shipped_declarations(self):
        derived = load_feature_registry()
        names = [f.name for f in derived]
        assert "high_average_entropy" in names

    def test_custom_derived_feature(self, clean_pe):
        derived = [DerivedFeature("big", "file bigger than 1KB", "size > 1024")]
        vec = extract_features(clean_pe, derived)
        assert vec["big"] == 1.0


class TestFileless:
    def test_conversion_preserves_matrices(self, tmp_path, packers):
        ds = Dataset.create(tmp_path / "ds")
        ds.make(14, format="PE", packers=[packers["zipper"]], seed=6)
        frame = ds.feature_frame()
        fl = ds.to_fileless()
        assert not (tmp_path / "ds" / "files").exists()
        reloaded = open_dataset(tmp_path / "ds")
        assert type(reloaded).__name__ == "FilelessDataset"
        assert np.array_equal(reloaded.feature_frame().values, frame.values)
        assert reloaded.feature_frame().labels == frame.labels

    def test_fileless_feature_subset_and_missing(self, tmp_path, packers):
        ds = Dataset.create(tmp_path / "ds")
        ds.make(8, format="PE", packers=[packers["zipper"]], seed=6)
        fl = ds.to_fileless()
        sub = fl.feature_frame(["size", "section_count"])
        assert sub.names == ["size", "section_count"]
        with pytest.raises(MissingFeature):
            fl.feature_frame(["no_such_feature"])

    def test_fileless_rejects_ingestion(self, tmp_path, packers):
        ds = Dataset.create(tmp_path / "ds")
        ds.make(8, format="PE", packers=[packers["zipper"]], seed=6)
        fl = ds.to_fileless()
        with pytest.raises(PackLabError):
            fl.update(tmp_path)

    def test_fileless_split(self, tmp_path, packers):
        ds = Dataset.create(tmp_path / "ds")
        ds.make(20, format="PE", packers=[packers["zipper"]], seed=6)
        fl = ds.to_fileless()
        a, b = split(fl, tmp_path / "a", tmp_path / "b", ratio=0.8, seed=1)
        assert a.fileless and b.fileless
        assert len(a.records) == 16 and len(b.records) == 4
        merged_shas = {r.sha256 for r in a.records} | {r.sha256 for r in b.records}
        assert merged_shas == {r.sha256 for r in fl.records}
        assert a.feature_frame().values.shape == (16, len(fl.feature_frame().names))

    def test_fileless_merge(self, tmp_path, packers):
        def fileless(name, seed):
            d = Dataset.create(tmp_path / name)
            d.make(8, format="PE", packers=[packers["zipper"]], seed=seed)
            return d.to_fileless()
        a, b = fileless("a", 1), fileless("b", 2)
        out = merge(a, b, tmp_path / "m")
        assert out.fileless
        assert len(out.records) == len(a.records) + len(b.records)
        assert out.feature_frame().values.shape[0] == len(out.records)


class TestManifest:
    def test_counts_equal_record_aggregation_after_every_op(self, tmp_path, packers, clean_dir):
        ds = Dataset.create(tmp_path / "ds")
        ds.update(clean_dir, not_packed=True)
        ds.check_consistency()
        ds.make(10, format="PE", packers=[packers["zipper"]], seed=1)
        ds.check_consistency()
        manifest = json.loads((tmp_path / "ds" / "manifest.json").read_text())
        total = sum(v["count"] for v in manifest["labels"].values())
        assert total == len(ds.records) == manifest["samples"]

    def test_feature_list_recorded(self, tmp_path):
        ds = Dataset.create(tmp_path / "ds")
        manifest = json.loads((tmp_path / "ds" / "manifest.json").read_text())
        assert "average_block_entropy" in manifest["features"]
