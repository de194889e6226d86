import numpy as np
import pytest

from plmbo.ensemble import (ForestModel, Tree, accuracy, concatenate_outputs, forest_fit, forest_predict,
                            split_by_mask)


def best_stump_accuracy(x, y):
    """Exhaustive single-threshold classifier on 1-D data."""
    best = 0.0
    xs = np.unique(x)
    for t in np.concatenate([[xs[0] - 1], (xs[1:] + xs[:-1]) / 2]):
        for flip in (0, 1):
            best = max(best, np.mean(((x > t).astype(int) ^ flip) == y))
    return best


class TestConcatenate:
    def test_single_member_multiclass(self):
        u = np.eye(3)[[0, 1, 2, 0, 1]]
        np.testing.assert_array_equal(concatenate_outputs([u]), u)

    def test_binary_first_columns(self):
        us = [np.eye(2)[[0, 1, 1, 0]], np.eye(2)[[1, 1, 0, 0]], np.eye(2)[[0, 0, 0, 1]]]
        f = concatenate_outputs(us)
        assert f.shape == (4, 3)
        np.testing.assert_array_equal(f, np.column_stack([u[:, 0] for u in us]))

    def test_block_layout(self):
        rng = np.random.default_rng(0)
        u1, u2 = rng.random((6, 4)), rng.random((6, 4))
        f = concatenate_outputs([u1, u2])
        assert f.shape == (6, 8)
        np.testing.assert_array_equal(f[:, :4], u1)
        np.testing.assert_array_equal(f[:, 4:], u2)

    def test_inconsistent_rows(self):
        with pytest.raises(ValueError):
            concatenate_outputs([np.zeros((3, 2)), np.zeros((4, 2))])
        with pytest.raises(ValueError):
            concatenate_outputs([])


class TestSplit:
    def test_alternating(self):
        x = np.arange(8.0).reshape(4, 2)
        xtr, ytr, xte, yte = split_by_mask(x, [0, 1, 0, 1], [True, False, True, False])
        np.testing.assert_array_equal(xtr, x[[0, 2]])
        np.testing.assert_array_equal(xte, x[[1, 3]])
        np.testing.assert_array_equal(yte, [1, 1])

    def test_all_labeled_empty_test(self):
        _, _, xte, _ = split_by_mask(np.zeros((3, 1)), [0, 1, 0], [True] * 3)
        assert xte.shape[0] == 0

    def test_counts(self):
        rng = np.random.default_rng(1)
        mask = rng.random(50) < 0.3
        xtr, _, xte, _ = split_by_mask(rng.random((50, 2)), np.zeros(50, int), mask)
        assert xtr.shape[0] == mask.sum() and xtr.shape[0] + xte.shape[0] == 50

    def test_empty_train(self):
        with pytest.raises(ValueError):
            split_by_mask(np.zeros((3, 1)), [0, 1, 0], [False] * 3)


class TestAccuracy:
    def test_values(self):
        assert accuracy([1, 2, 3], [1, 2, 3]) == 1.0
        assert accuracy([0, 0], [1, 1]) == 0.0
        assert accuracy([0, 1, 1, 0], [0, 1, 1, 1]) == 0.75

    def test_errors(self):
        with pytest.raises(ValueError):
            accuracy([], [])
        with pytest.raises(ValueError):
            accuracy([1], [1, 2])


class TestForest:
    def test_threshold_1d(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(-1, 1, (100, 1))
        y = (x[:, 0] > 0).astype(int)
        assert best_stump_accuracy(x[:, 0], y) == 1.0
        grid = np.linspace(-1, 1, 201)[:, None]
        grid = grid[np.abs(grid[:, 0]) > 0.05]
        model = forest_fit(x, y, n_trees=20, seed=0)
        assert accuracy(forest_predict(model, grid), (grid[:, 0] > 0).astype(int)) == 1.0

    def test_constant_labels(self):
        model = forest_fit(np.random.default_rng(3).random((20, 3)), np.full(20, 2), n_trees=5)
        assert np.all(forest_predict(model, np.random.default_rng(4).random((10, 3))) == 2)

    def test_xor(self):
        rng = np.random.default_rng(5)
        x = rng.uniform(-1, 1, (200, 2))
        y = ((x[:, 0] > 0) ^ (x[:, 1] > 0)).astype(int)
        # greedy Gini finds no gain at the root of balanced XOR, so depth 2 alone
        # is not reliable; the default depth leaves room to recover
        model = forest_fit(x, y, n_trees=50, max_depth=8, seed=1)
        assert accuracy(forest_predict(model, x), y) >= 0.95

    def test_structure(self):
        rng = np.random.default_rng(6)
        x = rng.random((60, 5))
        y = rng.integers(0, 3, 60)
        model = forest_fit(x, y, n_trees=10, seed=2)
        for t in model.trees:
            for f, v in zip(t.feature, t.value):
                assert f < 5
                if f < 0:
                    assert 0 <= v < 3

    def test_deterministic_and_json_roundtrip(self):
        rng = np.random.default_rng(7)
        x = rng.random((80, 4))
        y = (x[:, 0] + x[:, 2] > 1).astype(int)
        a = forest_fit(x, y, n_trees=15, seed=3)
        b = forest_fit(x, y, n_trees=15, seed=3)
        assert a.to_json() == b.to_json()
        c = ForestModel.from_json(a.to_json())
        np.testing.assert_array_equal(c.predict(x), a.predict(x))

    def test_row_permutation_invariance(self):
        rng = np.random.default_rng(8)
        x = rng.random((70, 3))
        y = (x[:, 1] > 0.5).astype(int)
        ids = np.arange(70)
        perm = rng.permutation(70)
        a = forest_fit(x, y, n_trees=10, seed=4, row_ids=ids)
        b = forest_fit(x[perm], y[perm], n_trees=10, seed=4, row_ids=ids[perm])
        assert a.to_json() == b.to_json()

    def test_tie_to_lower_class(self):
        leaf = lambda v: Tree([-1], [0.0], [-1], [-1], [v])
        model = ForestModel([leaf(1), leaf(0)], 2, 1, n_trees=2)
        assert forest_predict(model, np.zeros((1, 1)))[0] == 0

    def test_feature_mismatch(self):
        model = forest_fit(np.random.default_rng(9).random((10, 2)), np.arange(10) % 2, n_trees=2)
        with pytest.raises(ValueError):
            forest_predict(model, np.zeros((2, 3)))
