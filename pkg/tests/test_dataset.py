import json
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relayout.config import PipelineConfig, load_config, parse_config_text
from relayout.dataset import (DatasetRecord, annotate_all, merge_banner, select_hard, split,
                              split_counts)
from relayout.geometry import BBox, Element, Layout, iod, iou
from relayout.region_tree import build_region_tree
from relayout.synth import make_fixture


def el(cat, *box):
    return Element(cat, BBox(*box))


class TestMergeBanner:
    def test_exactly_atop(self):
        out = merge_banner([el("text", .1, .1, .3, .1), el("underlay", .1, .1, .3, .1)])
        assert [e.category for e in out] == ["banner"]
        assert out[0].bbox.as_list() == pytest.approx([.1, .1, .3, .1])

    def test_contained_in_larger_underlay(self):
        text, under = el("text", .2, .2, .1, .05), el("underlay", 0, 0, .8, .8)
        assert iod(text.bbox, under.bbox) == 1.0 and iou(text.bbox, under.bbox) < 0.95
        [banner] = merge_banner([under, text])
        assert banner.bbox == under.bbox

    def test_disjoint_unchanged(self):
        els = [el("text", 0, 0, .1, .1), el("underlay", .5, .5, .1, .1)]
        assert merge_banner(els) == els

    def test_each_element_used_once(self):
        els = [el("text", .1, .1, .3, .1), el("text", .1, .1, .3, .1), el("underlay", .1, .1, .3, .1)]
        out = merge_banner(els)
        assert Counter(e.category for e in out) == {"banner": 1, "text": 1}

    def test_banner_keeps_earlier_position(self):
        els = [el("logo", .6, .6, .1, .1), el("underlay", .1, .1, .3, .1), el("text", .1, .1, .3, .1)]
        assert [e.category for e in merge_banner(els)] == ["logo", "banner"]

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.sampled_from(["text", "underlay", "logo"]),
                              st.floats(0, .5), st.floats(0, .5), st.floats(.05, .5),
                              st.floats(.05, .5)), max_size=8))
    def test_each_merge_shrinks_by_one(self, specs):
        els = [el(c, x, y, w, h) for c, x, y, w, h in specs]
        out = merge_banner(els)
        assert len(out) <= len(els)
        # two elements in, one banner out
        assert len(els) - len(out) == sum(e.category == "banner" for e in out)


class TestSplit:
    @pytest.mark.parametrize("n, expected", [(10, [8, 1, 1]), (100, [80, 10, 10]), (7, [5, 1, 1])])
    def test_counts(self, n, expected):
        # n=7: exact shares 5.6 / 0.7 / 0.7, the two largest remainders get the spare items
        assert split_counts(n) == expected
        counts = Counter(split(n))
        assert [counts["train"], counts["val"], counts["test"]] == expected

    def test_seeded(self):
        assert split(50, seed=3) == split(50, seed=3)
        assert split(50, seed=3) != split(50, seed=4)

    @given(st.integers(1, 500), st.integers(0, 100))
    def test_partition(self, n, seed):
        labels = split(n, seed=seed)
        counts = Counter(labels)
        assert sum(counts.values()) == n and set(labels) <= {"train", "val", "test"}
        for name, ratio in zip(("train", "val", "test"), (0.8, 0.1, 0.1)):
            assert abs(counts[name] - n * ratio) < 1


class TestSelectHard:
    def record(self, split_name, *boxes):
        layout = Layout(100, 100, tuple(el("text", *b) for b in boxes))
        return DatasetRecord("r", layout, build_region_tree(layout), split=split_name)

    def test_flat_pair_excluded(self):
        assert select_hard([self.record("val", (.1, .1, .3, .2), (.1, .5, .5, .3))]) == []

    def test_six_elements_included(self):
        rec = self.record("test", *[(.1, .02 + .16 * i, .2 + .1 * i, .1) for i in range(6)])
        assert select_hard([rec]) == [rec]

    def test_nested_three_included(self):
        rec = self.record("val", (.1, .05, .8, .2), (.1, .5, .2, .2), (.6, .5, .3, .3))
        assert select_hard([rec]) == [rec]

    def test_train_never_hard(self):
        rec = self.record("train", *[(.1, .02 + .16 * i, .2 + .1 * i, .1) for i in range(6)])
        assert select_hard([rec]) == []


class TestConfig:
    def test_file_env_override_precedence(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("# comment\nphi = 0.4\ntheta=3\ncategory_order = a, b\n")
        cfg = load_config(path, {"seed": 9}, env={"RELAYOUT_THETA": "10", "RELAYOUT_OTHER": "x"})
        assert (cfg.phi, cfg.theta, cfg.seed) == (0.4, 10.0, 9)
        assert cfg.category_order == ("a", "b")

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("bogus = 1\n")
        with pytest.raises(ValueError, match="bogus"):
            load_config(path, env={})

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            PipelineConfig(theta=0)

    def test_bad_line(self):
        with pytest.raises(ValueError):
            parse_config_text("phi 0.5")

    def test_hash_ignores_output_location(self):
        assert PipelineConfig(output_dir="a", jobs=1).hash() == PipelineConfig(output_dir="b", jobs=4).hash()
        assert PipelineConfig(theta=3).hash() != PipelineConfig().hash()


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("fixture")
    make_fixture(root, n=10, seed=1)
    return root


def run(input_path, out, **kw):
    return annotate_all(PipelineConfig(input=str(input_path), output_dir=str(out), **kw))


class TestAnnotateAll:
    def test_ten_records(self, fixture_dir, tmp_path):
        result = run(fixture_dir / "records.jsonl", tmp_path / "o")
        assert result.exit_code == 0
        assert len(list((tmp_path / "o" / "docs").glob("*.output.html"))) == 10
        assert (tmp_path / "o" / "model.json").exists()
        manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert manifest["counts"]["annotated"] == 10
        assert manifest["config_hash"] == result.manifest["config_hash"]
        assert sum(manifest["counts"]["splits"].values()) == 10

    def test_rerun_identical(self, fixture_dir, tmp_path):
        a = run(fixture_dir / "records.jsonl", tmp_path / "a")
        b = run(fixture_dir / "records.jsonl", tmp_path / "b", jobs=2)
        assert a.manifest_hash == b.manifest_hash
        for rel in a.manifest["artifacts"]:
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()

    def test_corrupt_record_isolated(self, tmp_path):
        path = make_fixture(tmp_path / "fx", n=10, seed=2, corrupt=1)
        result = run(path, tmp_path / "o")
        assert len(result.records) == 9
        assert len(result.manifest["failures"]) == 1
        assert result.manifest["failures"][0]["line"] == 10
        # one failure out of ten is above the 1% budget
        assert result.exit_code == 1
        assert run(path, tmp_path / "o2", failure_budget=0.2).exit_code == 0

    def test_hard_only_in_val_test(self, tmp_path):
        path = make_fixture(tmp_path / "fx", n=60, seed=3)
        run(path, tmp_path / "o")
        rows = [json.loads(l) for l in (tmp_path / "o" / "index.jsonl").read_text().splitlines()]
        assert all(r["split"] in ("val", "test") for r in rows if r["hard"])

    def test_banners_merged_and_blocks_found(self, tmp_path):
        path = make_fixture(tmp_path / "fx", n=30, seed=4)
        result = run(path, tmp_path / "o")
        cats = [e.category for r in result.records for e in r.layout.elements]
        assert "banner" in cats
        assert any(r.blocks for r in result.records)

    def test_weights_follow_counts(self, fixture_dir, tmp_path):
        result = run(fixture_dir / "records.jsonl", tmp_path / "o", k_clusters=3, theta=2)
        cnt = result.cluster_model.counts
        assert np.allclose(result.weights, np.sqrt(cnt) / np.sqrt(cnt).sum())
