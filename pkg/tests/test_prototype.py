import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linear_sum_assignment

from relayout.geometry import BBox, Element
from relayout.prototype import (ClusterModel, PrototypeFeatures, Standardization, combine, entropy,
                                extract_element_feature, extract_region_feature,
                                extract_saliency_feature, fit_prototypes, kmeans,
                                per_item_weights, rebalance_weights, sample)
from relayout.region_tree import COLUMN, ROW, RegionNode
from relayout.saliency import SalientBlock


def blobs(seed=0, n_per=100, sigma=0.01):
    rng = np.random.default_rng(seed)
    centers = np.array([[i % 4 * 2.0, i // 4 * 2.0] for i in range(8)])
    labels = np.repeat(np.arange(8), n_per)
    return centers[labels] + rng.normal(0, sigma, size=(len(labels), 2)), labels


def hungarian_purity(pred, truth):
    k = max(pred.max(), truth.max()) + 1
    table = np.zeros((k, k), dtype=int)
    np.add.at(table, (pred, truth), 1)
    rows, cols = linear_sum_assignment(-table)
    return table[rows, cols].sum() / len(pred)


def block(cx, cy, w, h):
    return SalientBlock(BBox(cx - w / 2, cy - h / 2, w, h), 1.0)


class TestSaliencyFeature:
    def test_single(self):
        assert extract_saliency_feature([block(.3, .4, .2, .2)]) == pytest.approx((.3, .4))

    def test_equal_areas(self):
        f = extract_saliency_feature([block(.2, .2, .1, .1), block(.6, .6, .1, .1)])
        assert f == pytest.approx((.4, .4))

    def test_area_weighted(self):
        # areas 0.02 and 0.01
        c1, c2 = np.array([.1, .1]), np.array([.9, .9])
        f = extract_saliency_feature([block(*c1, .2, .1), block(*c2, .1, .1)])
        assert f == pytest.approx(tuple((2 * c1 + c2) / 3))

    def test_empty_falls_back_to_center(self):
        assert extract_saliency_feature([]) == (0.5, 0.5)


class TestRegionFeature:
    def test_leaf(self):
        assert extract_region_feature(RegionNode.leaf(0, BBox(0, 0, .1, .1))) == (0, 0, 0, 0, 0)

    def test_flat_row(self):
        row = RegionNode.region(ROW, [RegionNode.leaf(0, BBox(0, 0, .1, .1)),
                                      RegionNode.leaf(1, BBox(.3, 0, .1, .1))])
        assert extract_region_feature(row) == (1, 0, 0, 1, 0)

    def test_column_with_inner_row(self):
        row = RegionNode.region(ROW, [RegionNode.leaf(1, BBox(.1, .5, .2, .2)),
                                      RegionNode.leaf(2, BBox(.5, .5, .3, .4))])
        root = RegionNode.region(COLUMN, [RegionNode.leaf(0, BBox(.1, .1, .8, .2)), row])
        s, sx, sy, n_row, n_col = extract_region_feature(root)
        cx = [root.bbox.cx, row.bbox.cx]
        cy = [root.bbox.cy, row.bbox.cy]
        assert (s, n_row, n_col) == (2, 1, 1)
        assert sx == pytest.approx(abs(cx[0] - cx[1]) / 2)
        assert sy == pytest.approx(abs(cy[0] - cy[1]) / 2)


class TestElementFeature:
    order = ("logo", "banner", "text")

    def test_empty(self):
        assert extract_element_feature([], self.order) == (0, 0, 0)

    def test_counts(self):
        els = [Element(c, BBox(0, 0, .1, .1)) for c in ("text", "logo", "text")]
        assert extract_element_feature(els, self.order) == (1, 0, 2)

    def test_twenty_of_one(self):
        els = [Element("banner", BBox(0, 0, .1, .1))] * 20
        assert extract_element_feature(els, self.order) == (0, 20, 0)

    def test_unknown(self):
        with pytest.raises(ValueError):
            extract_element_feature([Element("sticker", BBox(0, 0, .1, .1))], self.order)


class TestCombine:
    feats = PrototypeFeatures((.3, .4), (1, .1, .2, 1, 0), (1, 0, 2))

    def test_identity_is_concatenation(self):
        assert combine(self.feats).tolist() == pytest.approx([.3, .4, 1, .1, .2, 1, 0, 1, 0, 2])

    def test_gamma_zero(self):
        assert not combine(self.feats, gamma=0.0)[-3:].any()

    def test_zero_variance_dimension(self):
        raw = np.array([[1.0, 5.0], [3.0, 5.0]])
        std = Standardization.fit(raw)
        assert std.apply(raw).tolist() == [[-1.0, 0.0], [1.0, 0.0]]

    def test_json(self):
        assert PrototypeFeatures.from_json(json.loads(json.dumps(self.feats.to_json()))) == self.feats


class TestKMeans:
    def test_exact_cover(self):
        pts = np.arange(16, dtype=float).reshape(8, 2) * 3
        model = kmeans(pts, 8, seed=1)
        assert model.inertia == 0.0
        assert sorted(model.counts.tolist()) == [1] * 8

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            kmeans(np.zeros((3, 2)), 4)

    def test_blob_purity(self):
        X, truth = blobs()
        model = kmeans(X, 8, seed=0)
        assert hungarian_purity(model.assignments, truth) >= 0.99

    def test_duplicated_dataset_same_centroids(self):
        X, _ = blobs(seed=4)
        a = kmeans(X, 8, seed=2).centroids
        b = kmeans(np.concatenate([X, X]), 8, seed=2).centroids
        order = lambda c: c[np.lexsort(c.T[::-1])]  # noqa: E731
        assert np.allclose(order(a), order(b), atol=1e-9)

    def test_seed_determinism(self):
        X, _ = blobs(seed=5)
        assert np.array_equal(kmeans(X, 8, seed=3).centroids, kmeans(X, 8, seed=3).centroids)

    def test_duplicate_points_fill_all_clusters(self):
        X = np.array([[0.0, 0.0]] * 6 + [[1.0, 1.0]] * 2)
        model = kmeans(X, 4, seed=0)
        assert (model.counts > 0).all()

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.integers(2, 6))
    def test_inertia_non_increasing(self, seed, k):
        X = np.random.default_rng(seed).normal(size=(60, 3))
        hist = kmeans(X, k, seed=seed).inertia_history
        assert all(b <= a + 1e-9 for a, b in zip(hist, hist[1:]))

    def test_model_json(self, tmp_path):
        feats = [PrototypeFeatures((.1 * i, .5), (i % 3, 0, 0, 1, 0), (i, 1)) for i in range(12)]
        model = fit_prototypes(feats, k=3, seed=0, ids=[f"r{i}" for i in range(12)])
        model.save(tmp_path / "m.json")
        back = ClusterModel.load(tmp_path / "m.json")
        assert np.array_equal(back.centroids, model.centroids)
        assert back.assignments.tolist() == model.assignments.tolist()
        assert back.ids == model.ids

    def test_fit_with_fewer_layouts_than_k(self, caplog):
        feats = [PrototypeFeatures((.1 * i, .5), (i, 0, 0, 1, 0), (i,)) for i in range(3)]
        assert fit_prototypes(feats, k=8).k == 3
        assert "instead of 8" in caplog.text


class TestRebalance:
    def test_symmetric(self):
        for theta in (0.5, 1, 6, 100):
            assert rebalance_weights([100, 100], theta) == pytest.approx([.5, .5], abs=1e-15)

    def test_theta_one(self):
        assert rebalance_weights([9, 1], 1) == pytest.approx([.9, .1], abs=1e-12)

    def test_cube_root(self):
        assert rebalance_weights([8, 1], 3) == pytest.approx([2 / 3, 1 / 3], abs=1e-12)

    def test_empty_cluster_gets_zero(self):
        w = rebalance_weights([5, 0, 5], 2)
        assert w[1] == 0 and w.sum() == pytest.approx(1)

    def test_bad_theta(self):
        with pytest.raises(ValueError):
            rebalance_weights([1, 2], 0)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(0, 10_000), min_size=2, max_size=10).filter(lambda c: sum(c) > 0))
    def test_entropy_grows_with_theta(self, cnt):
        ent = [entropy(rebalance_weights(cnt, t)) for t in (1, 2, 3, 6, 10, 100)]
        assert all(b >= a - 1e-12 for a, b in zip(ent, ent[1:]))


class TestSample:
    def test_single_cluster_is_uniform(self):
        drawn = sample(np.zeros(10, dtype=int), [1.0], 20_000, seed=0)
        freq = np.bincount(drawn, minlength=10) / 20_000
        assert np.abs(freq - 0.1).max() < 0.01

    def test_zero_weight_cluster_never_drawn(self):
        assignments = np.array([0, 1, 0, 1, 1])
        drawn = sample(assignments, [1.0, 0.0], 500, seed=1)
        assert set(assignments[drawn]) == {0}

    def test_balanced_weights_over_skewed_sizes(self):
        assignments = np.repeat([0, 1], [9000, 1000])
        drawn = sample(assignments, [0.5, 0.5], 100_000, seed=0)
        assert abs((assignments[drawn] == 1).mean() - 0.5) <= 0.01

    def test_per_item_weights_sum_to_one(self):
        assignments = np.array([0, 0, 1, 2, 2, 2])
        w = rebalance_weights(np.bincount(assignments), 6)
        assert per_item_weights(assignments, w).sum() == pytest.approx(1.0)

    def test_seeded(self):
        a = np.array([0, 1, 1, 2])
        assert sample(a, [.2, .3, .5], 50, 9).tolist() == sample(a, [.2, .3, .5], 50, 9).tolist()
