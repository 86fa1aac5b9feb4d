"""Tree, forest, and boosting tests with enumeration oracles."""

import numpy as np
import pytest

from incident_duration.schema import FeatureColumn, FeatureMatrix
from incident_duration.trees import (
    ForestConfig,
    GbmConfig,
    SchemaMismatchError,
    TreeFitError,
    cart_fit,
    forest_fit,
    gbm_fit,
    predict,
)


def matrix(rows, target=None, kinds=None, names=None):
    rows = np.asarray(rows, dtype=np.float64)
    p = rows.shape[1]
    names = names or [f"x{i}" for i in range(p)]
    kinds = kinds or ["numeric"] * p
    cols = tuple(FeatureColumn(names[i], kinds[i], names[i]) for i in range(p))
    return FeatureMatrix(cols, rows, target)


def exhaustive_best_split_sse(x, y):
    """Oracle: try every (feature, midpoint) split, return the lowest SSE."""
    n, p = x.shape
    best = (np.inf, None, None)
    for j in range(p):
        vals = np.unique(x[:, j])
        for a, b in zip(vals, vals[1:]):
            thr = (a + b) / 2
            left = x[:, j] <= thr
            sse = ((y[left] - y[left].mean()) ** 2).sum() + ((y[~left] - y[~left].mean()) ** 2).sum()
            if sse < best[0]:
                best = (sse, j, thr)
    return best


class TestCart:
    def test_one_dimensional_perfect_split(self):
        m = matrix([[1.0], [2.0], [3.0], [4.0]])
        t = cart_fit(m, [0, 0, 1, 1], ForestConfig(min_samples_leaf=1), task="classification")
        assert t.feature[0] == 0
        assert t.threshold[0] == 2.5
        pred = predict(t, m)
        assert np.array_equal(pred.argmax(axis=1), [0, 0, 1, 1])
        assert np.array_equal(pred.max(axis=1), np.ones(4))

    def test_constant_target_single_leaf(self):
        m = matrix(np.random.default_rng(0).normal(size=(20, 3)))
        t = cart_fit(m, np.full(20, 7.0), ForestConfig(min_samples_leaf=1), task="regression")
        assert t.n_nodes == 1
        assert np.all(predict(t, m) == 7.0)

    def test_identical_rows_mixed_labels(self):
        m = matrix([[1.0, 2.0], [1.0, 2.0]])
        t = cart_fit(m, [0, 1], ForestConfig(min_samples_leaf=1), task="classification")
        assert t.n_nodes == 1
        assert np.allclose(predict(t, m), [[0.5, 0.5], [0.5, 0.5]])

    def test_regression_split_matches_exhaustive_oracle(self):
        rng = np.random.default_rng(1)
        for trial in range(10):
            x = rng.normal(size=(40, 3))
            y = rng.normal(size=40)
            t = cart_fit(x, y, ForestConfig(max_depth=1, min_samples_leaf=1), task="regression")
            _, j, thr = exhaustive_best_split_sse(x, y)
            assert t.feature[0] == j
            assert t.threshold[0] == pytest.approx(thr)

    def test_min_samples_leaf_respected(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(60, 2))
        y = (x[:, 0] > 0).astype(int)
        t = cart_fit(x, y, ForestConfig(min_samples_leaf=7), task="classification")
        leaves = t.feature < 0
        assert t.n_samples[leaves].min() >= 7

    def test_row_permutation_leaves_structure_unchanged(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(80, 4))
        y = rng.integers(0, 3, size=80)
        perm = rng.permutation(80)
        t1 = cart_fit(x, y, ForestConfig(), task="classification")
        t2 = cart_fit(x[perm], y[perm], ForestConfig(), task="classification")
        assert np.array_equal(t1.feature, t2.feature)
        assert np.array_equal(t1.threshold, t2.threshold)
        assert np.allclose(predict(t1, x), predict(t2, x), atol=1e-12)


class TestForest:
    def test_degenerate_forest_equals_cart(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(100, 4))
        y = (x @ rng.normal(size=4) > 0).astype(int)
        f = forest_fit(
            x, y, ForestConfig(n_estimators=1, bootstrap=False, max_features="all", seed=9), mode="rf", task="classification"
        )
        c = cart_fit(x, y, ForestConfig(), task="classification")
        assert np.array_equal(predict(f, x), predict(c, x))

    def test_forest_at_least_single_tree_training_accuracy(self):
        rng = np.random.default_rng(5)
        n = 500
        x = np.vstack([rng.normal(0, 1, size=(n // 2, 2)), rng.normal(4, 1, size=(n // 2, 2))])
        y = np.repeat([0, 1], n // 2)
        cfg = ForestConfig(n_estimators=50, max_features=0.5, seed=6)
        f = forest_fit(x, y, cfg, mode="rf", task="classification")
        single = cart_fit(x, y, ForestConfig(), task="classification")
        acc_f = (predict(f, x).argmax(axis=1) == y).mean()
        acc_s = (predict(single, x).argmax(axis=1) == y).mean()
        assert acc_f >= acc_s

    def test_deterministic_serialization(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(120, 3))
        y = rng.normal(size=120)
        cfg = ForestConfig(n_estimators=5, seed=11)
        a = forest_fit(x, y, cfg, mode="rf", task="regression").to_state()
        b = forest_fit(x, y, cfg, mode="rf", task="regression").to_state()
        assert a == b

    def test_dropping_last_tree_matches_smaller_forest(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(150, 3))
        y = x @ np.array([1.0, -1.0, 0.5]) + rng.normal(size=150)
        big = forest_fit(x, y, ForestConfig(n_estimators=6, seed=13), mode="rf", task="regression")
        small = forest_fit(x, y, ForestConfig(n_estimators=5, seed=13), mode="rf", task="regression")
        manual = np.mean([predict(t, x) for t in big.trees[:5]], axis=0)
        assert np.allclose(manual, predict(small, x), atol=1e-12)

    def test_forest_prediction_is_mean_of_trees(self):
        rng = np.random.default_rng(9)
        x = rng.normal(size=(60, 3))
        y = rng.integers(0, 2, size=60)
        f = forest_fit(x, y, ForestConfig(n_estimators=7, seed=3), mode="rf", task="classification")
        per_tree = np.stack([predict(t, x) for t in f.trees])
        assert np.allclose(per_tree.mean(axis=0), predict(f, x), atol=1e-15)

    def test_extra_trees_no_bootstrap_by_default(self):
        rng = np.random.default_rng(10)
        x = rng.normal(size=(80, 3))
        y = (x[:, 0] > 0).astype(int)
        f = forest_fit(x, y, ForestConfig(n_estimators=10, seed=4), mode="extra_trees", task="classification")
        # every tree saw all rows: root n_samples equals the dataset size
        assert all(t.n_samples[0] == 80 for t in f.trees)

    def test_max_features_zero_columns_rejected(self):
        x = np.random.default_rng(11).normal(size=(30, 5))
        with pytest.raises(TreeFitError):
            forest_fit(x, np.zeros(30), ForestConfig(max_features=0.01), mode="rf", task="regression")

    def test_probability_vectors_sum_to_one(self):
        rng = np.random.default_rng(12)
        x = rng.normal(size=(90, 3))
        y = rng.integers(0, 3, size=90)
        f = forest_fit(x, y, ForestConfig(n_estimators=10, seed=5), mode="rf", task="classification")
        p = predict(f, x)
        assert np.all(p >= 0)
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)


class TestGbm:
    def test_single_round_full_rate_matches_cart_residuals(self):
        rng = np.random.default_rng(13)
        x = rng.normal(size=(100, 3))
        y = x @ np.array([2.0, -1.0, 0.0]) + rng.normal(size=100)
        g = gbm_fit(
            x, y, GbmConfig(n_rounds=1, learning_rate=1.0, growth="level_wise", max_depth=6, min_samples_leaf=1), task="regression"
        )
        c = cart_fit(x, y, ForestConfig(max_depth=6, min_samples_leaf=1), task="regression")
        assert np.allclose(y - predict(g, x), y - predict(c, x), atol=1e-9)

    def test_training_sse_nonincreasing(self):
        rng = np.random.default_rng(14)
        x = rng.normal(size=(300, 5))
        y = x @ rng.normal(size=5) + rng.normal(size=300)
        cfg = GbmConfig(n_rounds=60, learning_rate=0.1, growth="leaf_wise", max_leaves=15)
        model = gbm_fit(x, y, cfg, task="regression")
        score = np.full(300, model.initial[0])
        prev = np.inf
        for tree in model.trees[0]:
            score = score + cfg.learning_rate * predict(tree, x)
            sse = float(np.sum((y - score) ** 2))
            assert sse <= prev
            prev = sse

    def test_constant_target_zero_leaves(self):
        x = np.random.default_rng(15).normal(size=(50, 2))
        model = gbm_fit(x, np.full(50, 3.0), GbmConfig(n_rounds=5), task="regression")
        assert model.initial[0] == 3.0
        for tree in model.trees[0]:
            assert tree.n_nodes == 1
            assert tree.value[0] == 0.0

    def test_leaf_wise_obeys_max_leaves(self):
        rng = np.random.default_rng(16)
        x = rng.normal(size=(400, 4))
        y = rng.normal(size=400)
        model = gbm_fit(x, y, GbmConfig(n_rounds=3, max_leaves=7, min_samples_leaf=1), task="regression")
        for tree in model.trees[0]:
            assert (tree.feature < 0).sum() <= 7

    def test_level_wise_obeys_max_depth(self):
        rng = np.random.default_rng(17)
        x = rng.normal(size=(400, 4))
        y = rng.normal(size=400)
        model = gbm_fit(x, y, GbmConfig(n_rounds=2, growth="level_wise", max_depth=3, min_samples_leaf=1), task="regression")
        for tree in model.trees[0]:
            # max depth 3 allows at most 2^3 leaves and 2^4 - 1 nodes
            assert (tree.feature < 0).sum() <= 8
            assert tree.n_nodes <= 15

    def test_classification_probabilities(self):
        rng = np.random.default_rng(18)
        x = rng.normal(size=(200, 3))
        y = rng.integers(0, 3, size=200)
        model = gbm_fit(x, y, GbmConfig(n_rounds=10, loss="logistic"), task="classification")
        p = predict(model, x)
        assert p.shape == (200, 3)
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)

    def test_nonfinite_gradient_names_round(self):
        x = np.random.default_rng(30).normal(size=(40, 2))
        y = np.full(40, np.inf)
        with pytest.raises(TreeFitError, match="round 0"):
            gbm_fit(x, y, GbmConfig(n_rounds=3), task="regression")

    def test_classification_requires_logistic(self):
        x = np.random.default_rng(19).normal(size=(30, 2))
        with pytest.raises(TreeFitError):
            gbm_fit(x, np.zeros(30, dtype=int), GbmConfig(loss="squared"), task="classification")

    def test_target_statistic_encoding_runs_and_helps(self):
        rng = np.random.default_rng(20)
        n = 400
        cat = rng.integers(0, 6, size=n)
        onehot = np.eye(6)[cat]
        noise = rng.normal(size=(n, 1))
        effects = np.array([0.0, 1.0, -1.0, 2.0, 0.5, -2.0])
        y = effects[cat] + 0.3 * rng.normal(size=n)
        cols = tuple(
            [FeatureColumn(f"c={v}", "onehot", "c") for v in range(6)] + [FeatureColumn("z", "numeric", "z")]
        )
        m = FeatureMatrix(cols, np.hstack([onehot, noise]), y)
        cfg = GbmConfig(n_rounds=40, growth="level_wise", max_depth=4, categorical_encoding="target_statistic", min_samples_leaf=1)
        model = gbm_fit(m, y, cfg, task="regression")
        pred = predict(model, m)
        assert float(np.mean((pred - y) ** 2)) < 0.5 * float(np.var(y))

    def test_staged_prediction_truncates_rounds(self):
        rng = np.random.default_rng(21)
        x = rng.normal(size=(100, 2))
        y = rng.normal(size=100)
        model = gbm_fit(x, y, GbmConfig(n_rounds=8), task="regression")
        p3 = predict(model, x, n_rounds=3)
        manual = np.full(100, model.initial[0])
        for t in model.trees[0][:3]:
            manual = manual + model.config.learning_rate * predict(t, x)
        assert np.allclose(p3, manual, atol=1e-15)


class TestSchemaChecks:
    def test_mismatched_columns_rejected(self):
        m = matrix(np.random.default_rng(22).normal(size=(30, 2)), names=["a", "b"])
        t = cart_fit(m, np.zeros(30), ForestConfig(), task="regression")
        other = matrix(np.random.default_rng(23).normal(size=(5, 2)), names=["a", "c"])
        with pytest.raises(SchemaMismatchError) as err:
            predict(t, other)
        assert "b" in str(err.value)
        assert "c" in str(err.value)

    def test_single_leaf_tree_predicts_everywhere(self):
        m = matrix(np.random.default_rng(24).normal(size=(10, 2)))
        t = cart_fit(m, np.full(10, 2.5), ForestConfig(), task="regression")
        assert np.all(predict(t, m) == 2.5)
